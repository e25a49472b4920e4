#include "prunelab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "prunelab/rng.hpp"

namespace prunelab {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("truncated file: " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imf(images_path, std::ios::binary);
    if (!imf) throw std::runtime_error("cannot open " + images_path);
    if (read_be32(imf, images_path) != kImagesMagic)
        throw std::runtime_error("bad magic in " + images_path);
    const std::uint32_t n = read_be32(imf, images_path);
    const std::uint32_t rows = read_be32(imf, images_path);
    const std::uint32_t cols = read_be32(imf, images_path);

    std::vector<unsigned char> pixels(std::size_t(n) * rows * cols);
    imf.read(reinterpret_cast<char*>(pixels.data()), std::streamsize(pixels.size()));
    if (!imf) throw std::runtime_error("truncated file: " + images_path);

    std::ifstream lbf(labels_path, std::ios::binary);
    if (!lbf) throw std::runtime_error("cannot open " + labels_path);
    if (read_be32(lbf, labels_path) != kLabelsMagic)
        throw std::runtime_error("bad magic in " + labels_path);
    const std::uint32_t ln = read_be32(lbf, labels_path);
    if (ln != n)
        throw std::runtime_error("count mismatch: " + std::to_string(n) + " images vs " +
                                 std::to_string(ln) + " labels");
    std::vector<unsigned char> raw_labels(ln);
    lbf.read(reinterpret_cast<char*>(raw_labels.data()), std::streamsize(ln));
    if (!lbf) throw std::runtime_error("truncated file: " + labels_path);

    Dataset ds;
    ds.images = Tensor({n, 1, rows, cols});
    for (std::size_t i = 0; i < pixels.size(); ++i)
        ds.images.data[i] = double(pixels[i]) / 255.0;
    ds.labels.assign(raw_labels.begin(), raw_labels.end());
    int max_label = 0;
    for (int l : ds.labels) max_label = std::max(max_label, l);
    ds.num_classes = std::size_t(max_label) + 1;
    return ds;
}

void save_idx(const Dataset& ds, const std::string& images_path,
              const std::string& labels_path) {
    const std::size_t n = ds.size();
    const std::size_t rows = ds.images.shape[2], cols = ds.images.shape[3];
    std::ofstream imf(images_path, std::ios::binary);
    if (!imf) throw std::runtime_error("cannot write " + images_path);
    write_be32(imf, kImagesMagic);
    write_be32(imf, std::uint32_t(n));
    write_be32(imf, std::uint32_t(rows));
    write_be32(imf, std::uint32_t(cols));
    for (double v : ds.images.data) {
        unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0));
        imf.write(reinterpret_cast<char*>(&b), 1);
    }
    std::ofstream lbf(labels_path, std::ios::binary);
    if (!lbf) throw std::runtime_error("cannot write " + labels_path);
    write_be32(lbf, kLabelsMagic);
    write_be32(lbf, std::uint32_t(n));
    for (int l : ds.labels) {
        unsigned char b = static_cast<unsigned char>(l);
        lbf.write(reinterpret_cast<char*>(&b), 1);
    }
}

Dataset synth_blobs(std::size_t num_classes, std::size_t samples_per_class,
                    std::size_t image_side, std::uint64_t seed) {
    if (num_classes < 1 || samples_per_class < 1 || image_side < 1)
        throw std::invalid_argument("synth_blobs arguments must be >= 1");
    const std::size_t n = num_classes * samples_per_class;
    Dataset ds;
    ds.images = Tensor({n, 1, image_side, image_side});
    ds.labels.resize(n);
    ds.num_classes = num_classes;
    ds.split = "train";

    const double side = double(image_side);
    const double ring = side / 3.0;
    const double sigma = side / 6.0;
    auto rng = make_rng(mix_seed(seed, 0xb10b));
    std::normal_distribution<double> noise(0.0, 0.12);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    std::uniform_real_distribution<double> amp(0.6, 1.0);

    std::size_t idx = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        const double angle = 2.0 * std::numbers::pi * double(c) / double(num_classes);
        const double cy = side / 2.0 + ring * std::sin(angle);
        const double cx = side / 2.0 + ring * std::cos(angle);
        for (std::size_t s = 0; s < samples_per_class; ++s, ++idx) {
            const double a = amp(rng);
            const double jy = cy + jitter(rng), jx = cx + jitter(rng);
            double* img = ds.images.data.data() + idx * image_side * image_side;
            for (std::size_t y = 0; y < image_side; ++y)
                for (std::size_t x = 0; x < image_side; ++x) {
                    const double dy = double(y) + 0.5 - jy;
                    const double dx = double(x) + 0.5 - jx;
                    double v = a * std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
                    v += noise(rng);
                    img[y * image_side + x] = std::clamp(v, 0.0, 1.0);
                }
            ds.labels[idx] = int(c);
        }
    }
    return ds;
}

Tensor Dataset::batch_images(std::size_t start, std::size_t count) const {
    const std::size_t sample = images.numel() / size();
    std::vector<std::size_t> s{count};
    s.insert(s.end(), images.shape.begin() + 1, images.shape.end());
    return Tensor(s, std::vector<double>(images.data.begin() + start * sample,
                                         images.data.begin() + (start + count) * sample));
}

std::vector<int> Dataset::batch_labels(std::size_t start, std::size_t count) const {
    return std::vector<int>(labels.begin() + start, labels.begin() + start + count);
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    const std::size_t sample = images.numel() / size();
    Dataset out;
    std::vector<std::size_t> s{indices.size()};
    s.insert(s.end(), images.shape.begin() + 1, images.shape.end());
    out.images = Tensor(s);
    out.labels.resize(indices.size());
    out.num_classes = num_classes;
    out.split = split;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        std::copy_n(images.data.begin() + indices[i] * sample, sample,
                    out.images.data.begin() + i * sample);
        out.labels[i] = labels[indices[i]];
    }
    return out;
}

BatchIterator::BatchIterator(const Dataset& ds, std::size_t batch_size, std::uint64_t seed)
    : ds_(&ds), batch_size_(batch_size), seed_(seed) {
    if (batch_size_ == 0) throw std::invalid_argument("batch size must be >= 1");
}

std::size_t BatchIterator::batches_per_epoch() const {
    return (ds_->size() + batch_size_ - 1) / batch_size_;
}

std::vector<std::size_t> BatchIterator::epoch_order(std::size_t epoch) const {
    std::vector<std::size_t> order(ds_->size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto rng = make_rng(mix_seed(seed_, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

BatchIterator::Batch BatchIterator::get(std::size_t epoch, std::size_t b) const {
    auto order = epoch_order(epoch);
    const std::size_t start = b * batch_size_;
    const std::size_t count = std::min(batch_size_, ds_->size() - start);
    std::vector<std::size_t> idx(order.begin() + start, order.begin() + start + count);
    Dataset sub = ds_->subset(idx);
    return {std::move(sub.images), std::move(sub.labels)};
}

}  // namespace prunelab
