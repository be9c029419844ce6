#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "fedluar/errors.hpp"

namespace fedluar {

// A model parameter vector keyed by layer id. std::map keeps iteration in
// ascending id order, which fixes the floating-point accumulation order for
// every reduction in the codebase, and naturally represents restricted
// subsets (an update that omits recycled layers simply has fewer keys).
using LayerKeyedVector = std::map<int, std::vector<double>>;

inline std::size_t total_dim(const LayerKeyedVector& v) {
    std::size_t n = 0;
    for (const auto& [id, x] : v) n += x.size();
    return n;
}

inline bool same_structure(const LayerKeyedVector& a, const LayerKeyedVector& b) {
    if (a.size() != b.size()) return false;
    auto ia = a.begin();
    auto ib = b.begin();
    for (; ia != a.end(); ++ia, ++ib) {
        if (ia->first != ib->first || ia->second.size() != ib->second.size()) return false;
    }
    return true;
}

inline bool bitwise_equal(const LayerKeyedVector& a, const LayerKeyedVector& b) {
    if (!same_structure(a, b)) return false;
    auto ia = a.begin();
    auto ib = b.begin();
    for (; ia != a.end(); ++ia, ++ib) {
        const auto& xa = ia->second;
        const auto& xb = ib->second;
        for (std::size_t i = 0; i < xa.size(); ++i) {
            if (xa[i] != xb[i]) return false;
        }
    }
    return true;
}

// dst += scale * src for every layer present in src. Layers of src must
// exist in dst with matching sizes.
inline void add_scaled(LayerKeyedVector& dst, const LayerKeyedVector& src, double scale) {
    for (const auto& [id, x] : src) {
        auto it = dst.find(id);
        if (it == dst.end() || it->second.size() != x.size()) {
            throw InternalError("add_scaled: layer " + std::to_string(id) +
                                " missing or size mismatch in destination");
        }
        auto& d = it->second;
        for (std::size_t i = 0; i < x.size(); ++i) d[i] += scale * x[i];
    }
}

inline double l2_norm_sq(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

inline double l2_norm_sq(const LayerKeyedVector& v) {
    double s = 0.0;
    for (const auto& [id, x] : v) s += l2_norm_sq(x);
    return s;
}

inline double l2_norm(const LayerKeyedVector& v) { return std::sqrt(l2_norm_sq(v)); }

// Per-layer Euclidean norms, ascending id order.
inline std::map<int, double> layer_norms(const LayerKeyedVector& v) {
    std::map<int, double> out;
    for (const auto& [id, x] : v) out[id] = std::sqrt(l2_norm_sq(x));
    return out;
}

// a - b, elementwise, over the layers of a. Structures must match.
inline LayerKeyedVector difference(const LayerKeyedVector& a, const LayerKeyedVector& b) {
    if (!same_structure(a, b)) throw InternalError("difference: structure mismatch");
    LayerKeyedVector out = a;
    auto ib = b.begin();
    for (auto io = out.begin(); io != out.end(); ++io, ++ib) {
        auto& x = io->second;
        const auto& y = ib->second;
        for (std::size_t i = 0; i < x.size(); ++i) x[i] -= y[i];
    }
    return out;
}

}  // namespace fedluar
