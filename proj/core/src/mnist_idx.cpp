// segota: simulator for segmented over-the-air aggregation in federated learning
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "segota/fl_core.hpp"

namespace segota {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::ifstream& in, const std::string& path, std::size_t offset) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in)
        throw std::runtime_error("idx: " + path + " truncated at offset " +
                                 std::to_string(offset));
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

std::vector<unsigned char> read_payload(std::ifstream& in, const std::string& path,
                                        std::size_t count, std::size_t offset) {
    std::vector<unsigned char> data(count);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count)
        throw std::runtime_error("idx: " + path + " truncated at offset " +
                                 std::to_string(offset + static_cast<std::size_t>(in.gcount())));
    return data;
}

} // namespace

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img)
        throw std::runtime_error("idx: cannot open " + images_path);
    const std::uint32_t img_magic = read_u32_be(img, images_path, 0);
    if (img_magic != kImageMagic)
        throw std::runtime_error("idx: bad image magic number at offset 0 in " + images_path);
    const std::uint32_t img_count = read_u32_be(img, images_path, 4);
    const std::uint32_t rows = read_u32_be(img, images_path, 8);
    const std::uint32_t cols = read_u32_be(img, images_path, 12);
    const std::size_t pixels = std::size_t(img_count) * rows * cols;
    const std::vector<unsigned char> raw = read_payload(img, images_path, pixels, 16);

    std::ifstream lbl(labels_path, std::ios::binary);
    if (!lbl)
        throw std::runtime_error("idx: cannot open " + labels_path);
    const std::uint32_t lbl_magic = read_u32_be(lbl, labels_path, 0);
    if (lbl_magic != kLabelMagic)
        throw std::runtime_error("idx: bad label magic number at offset 0 in " + labels_path);
    const std::uint32_t lbl_count = read_u32_be(lbl, labels_path, 4);
    if (lbl_count != img_count)
        throw std::runtime_error("idx: image count " + std::to_string(img_count) +
                                 " does not match label count " + std::to_string(lbl_count));
    const std::vector<unsigned char> labels = read_payload(lbl, labels_path, lbl_count, 8);

    Dataset data;
    data.num_classes = 10;
    data.features.resize(img_count, std::size_t(rows) * cols);
    data.labels.resize(img_count);
    const std::size_t dim = std::size_t(rows) * cols;
    for (std::uint32_t i = 0; i < img_count; ++i) {
        for (std::size_t j = 0; j < dim; ++j)
            data.features(i, j) = static_cast<double>(raw[i * dim + j]) / 255.0;
        if (labels[i] > 9)
            throw std::runtime_error("idx: label value " + std::to_string(int(labels[i])) +
                                     " out of range in " + labels_path);
        data.labels(i) = static_cast<int>(labels[i]);
    }
    return data;
}

} // namespace segota
