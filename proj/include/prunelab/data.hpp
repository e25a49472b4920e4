#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prunelab/tensor.hpp"

namespace prunelab {

// Images are [N,C,H,W] with pixels in [0,1].
struct Dataset {
    Tensor images;
    std::vector<int> labels;
    std::size_t num_classes = 0;
    std::string split;  // "train" / "test"

    std::size_t size() const { return labels.size(); }
    // Copy of samples [start, start+count).
    Tensor batch_images(std::size_t start, std::size_t count) const;
    std::vector<int> batch_labels(std::size_t start, std::size_t count) const;
    Dataset subset(const std::vector<std::size_t>& indices) const;
};

// IDX (big-endian) pair loader; pixels scaled by 1/255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx(const Dataset& ds, const std::string& images_path,
              const std::string& labels_path);

// Gaussian intensity blobs at class-specific positions; deterministic in seed.
Dataset synth_blobs(std::size_t num_classes, std::size_t samples_per_class,
                    std::size_t image_side, std::uint64_t seed);

// Epoch shuffles are a pure function of (seed, epoch); each epoch is a
// permutation of all indices.
class BatchIterator {
  public:
    BatchIterator(const Dataset& ds, std::size_t batch_size, std::uint64_t seed);

    struct Batch {
        Tensor images;
        std::vector<int> labels;
    };

    std::size_t batches_per_epoch() const;
    // batch b of epoch e, b in [0, batches_per_epoch)
    Batch get(std::size_t epoch, std::size_t b) const;
    std::vector<std::size_t> epoch_order(std::size_t epoch) const;

  private:
    const Dataset* ds_;
    std::size_t batch_size_;
    std::uint64_t seed_;
};

}  // namespace prunelab
