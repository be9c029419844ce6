#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedluar/nn.hpp"

namespace fedluar {

struct Dataset {
    Matrix features;          // N x F
    std::vector<int> labels;  // N entries in [0, K)
    int num_classes = 0;

    std::size_t size() const { return features.rows; }
    std::size_t feature_dim() const { return features.cols; }
};

struct ClientShard {
    int client_id = 0;
    std::vector<std::size_t> sample_indices;
};

// K Gaussian clusters on mutually orthogonal unit directions, scaled so the
// pairwise mean distance equals class_separation (exact when K <= F), unit
// isotropic noise, labels assigned round-robin so counts balance within 1.
Dataset generate_synthetic(std::uint64_t seed, std::size_t n, std::size_t f,
                           std::size_t k, double class_separation);

// Label-based Dirichlet split: per class, proportions ~ Dirichlet(alpha,...)
// mapped to integer counts by largest-remainder rounding (ties favor the
// lower client id), assigned over a shuffled index list. Redraws the whole
// partition when any shard lands empty, up to 100 attempts.
std::vector<ClientShard> dirichlet_partition(const Dataset& dataset, std::size_t m,
                                             double alpha, std::uint64_t seed);

// CSV loader, header `label,f0,f1,...`; features parsed as decimal floats.
Dataset load_csv_dataset(const std::string& path);

// Deterministic train/eval split: the last floor(eval_fraction * N) indices
// of a seeded shuffle form the eval set.
struct DataSplit {
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> eval_indices;
};
DataSplit split_train_eval(std::size_t n, double eval_fraction, std::uint64_t seed);

// Gathers the given rows into a dense batch.
Matrix gather_rows(const Dataset& dataset, const std::vector<std::size_t>& indices);
std::vector<int> gather_labels(const Dataset& dataset, const std::vector<std::size_t>& indices);

}  // namespace fedluar
