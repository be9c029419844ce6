#include "fedluar/nn.hpp"

#include <algorithm>
#include <cmath>

namespace fedluar {

std::size_t LayerSpec::input_dim() const {
    return kind == LayerKind::dense ? fan_in : in_h * in_w * in_c;
}

std::size_t LayerSpec::output_dim() const {
    return kind == LayerKind::dense ? fan_out : out_h() * out_w() * out_channels;
}

LayerSpec make_dense_spec(int id, std::size_t fan_in, std::size_t fan_out) {
    if (fan_in == 0 || fan_out == 0) {
        throw ConfigError("dense layer " + std::to_string(id) + ": zero dimension");
    }
    LayerSpec s;
    s.layer_id = id;
    s.kind = LayerKind::dense;
    s.fan_in = fan_in;
    s.fan_out = fan_out;
    s.param_count = fan_in * fan_out + fan_out;
    return s;
}

LayerSpec make_conv_spec(int id, std::size_t in_h, std::size_t in_w, std::size_t in_c,
                         std::size_t kernel, std::size_t out_channels) {
    if (in_h == 0 || in_w == 0 || in_c == 0 || kernel == 0 || out_channels == 0) {
        throw ConfigError("conv layer " + std::to_string(id) + ": zero dimension");
    }
    if (kernel > in_h || kernel > in_w) {
        throw ConfigError("conv layer " + std::to_string(id) +
                          ": kernel exceeds input extent");
    }
    LayerSpec s;
    s.layer_id = id;
    s.kind = LayerKind::conv2d;
    s.in_h = in_h;
    s.in_w = in_w;
    s.in_c = in_c;
    s.kernel = kernel;
    s.out_channels = out_channels;
    s.param_count = kernel * kernel * in_c * out_channels + out_channels;
    return s;
}

Model::Model(std::vector<LayerSpec> specs) : specs_(std::move(specs)) {
    if (specs_.empty()) throw ConfigError("model needs at least one layer");
    for (std::size_t l = 0; l < specs_.size(); ++l) {
        if (specs_[l].layer_id != static_cast<int>(l)) {
            throw ConfigError("layer ids must be contiguous from 0, got " +
                              std::to_string(specs_[l].layer_id) + " at position " +
                              std::to_string(l));
        }
        if (l > 0 && specs_[l].input_dim() != specs_[l - 1].output_dim()) {
            throw ConfigError("layer " + std::to_string(l) + " input dim " +
                              std::to_string(specs_[l].input_dim()) +
                              " does not match previous output dim " +
                              std::to_string(specs_[l - 1].output_dim()));
        }
        total_params_ += specs_[l].param_count;
    }
}

LayerKeyedVector Model::init_params(std::uint64_t seed) const {
    LayerKeyedVector params;
    for (const auto& spec : specs_) {
        Rng rng(derive_seed(seed, Stream::model_init,
                            static_cast<std::uint64_t>(spec.layer_id)));
        std::vector<double> buf(spec.param_count, 0.0);
        const double limit = std::sqrt(6.0 / static_cast<double>(spec.init_fan_in()));
        const std::size_t bias_len =
            spec.kind == LayerKind::dense ? spec.fan_out : spec.out_channels;
        const std::size_t weight_len = spec.param_count - bias_len;
        for (std::size_t i = 0; i < weight_len; ++i) {
            buf[i] = (2.0 * rng.uniform() - 1.0) * limit;
        }
        params[spec.layer_id] = std::move(buf);
    }
    return params;
}

void Model::check_params(const LayerKeyedVector& params) const {
    if (params.size() != specs_.size()) {
        throw InternalError("parameter vector has " + std::to_string(params.size()) +
                            " layers, model has " + std::to_string(specs_.size()));
    }
    for (const auto& spec : specs_) {
        auto it = params.find(spec.layer_id);
        if (it == params.end() || it->second.size() != spec.param_count) {
            throw InternalError("parameter buffer for layer " +
                                std::to_string(spec.layer_id) + " missing or wrong size");
        }
    }
}

namespace {

void dense_forward(const LayerSpec& spec, const std::vector<double>& p,
                   const Matrix& in, Matrix& out) {
    const std::size_t n = in.rows, fi = spec.fan_in, fo = spec.fan_out;
    const double* w = p.data();
    const double* b = p.data() + fi * fo;
    for (std::size_t r = 0; r < n; ++r) {
        const double* x = in.data.data() + r * fi;
        double* z = out.data.data() + r * fo;
        for (std::size_t j = 0; j < fo; ++j) z[j] = b[j];
        for (std::size_t i = 0; i < fi; ++i) {
            const double xi = x[i];
            if (xi == 0.0) continue;
            const double* wrow = w + i * fo;
            for (std::size_t j = 0; j < fo; ++j) z[j] += xi * wrow[j];
        }
    }
}

// dZ is the upstream gradient for this layer's pre-activation output.
void dense_backward(const LayerSpec& spec, const std::vector<double>& p,
                    const Matrix& in, const Matrix& dz, std::vector<double>& gbuf,
                    Matrix* din) {
    const std::size_t n = in.rows, fi = spec.fan_in, fo = spec.fan_out;
    const double* w = p.data();
    double* gw = gbuf.data();
    double* gb = gbuf.data() + fi * fo;
    for (std::size_t r = 0; r < n; ++r) {
        const double* x = in.data.data() + r * fi;
        const double* d = dz.data.data() + r * fo;
        for (std::size_t i = 0; i < fi; ++i) {
            const double xi = x[i];
            if (xi == 0.0) continue;
            double* grow = gw + i * fo;
            for (std::size_t j = 0; j < fo; ++j) grow[j] += xi * d[j];
        }
        for (std::size_t j = 0; j < fo; ++j) gb[j] += d[j];
        if (din) {
            double* dx = din->data.data() + r * fi;
            for (std::size_t i = 0; i < fi; ++i) {
                const double* wrow = w + i * fo;
                double acc = 0.0;
                for (std::size_t j = 0; j < fo; ++j) acc += wrow[j] * d[j];
                dx[i] = acc;
            }
        }
    }
}

// Valid convolution, stride 1, HWC layout for activations, KKIO layout for
// weights: w[(kh*K + kw)*IC*OC + ic*OC + oc].
void conv_forward(const LayerSpec& spec, const std::vector<double>& p,
                  const Matrix& in, Matrix& out) {
    const std::size_t n = in.rows;
    const std::size_t ih = spec.in_h, iw = spec.in_w, ic = spec.in_c;
    const std::size_t k = spec.kernel, oc = spec.out_channels;
    const std::size_t oh = spec.out_h(), ow = spec.out_w();
    const double* w = p.data();
    const double* b = p.data() + k * k * ic * oc;
    for (std::size_t r = 0; r < n; ++r) {
        const double* x = in.data.data() + r * ih * iw * ic;
        double* z = out.data.data() + r * oh * ow * oc;
        for (std::size_t y0 = 0; y0 < oh; ++y0) {
            for (std::size_t x0 = 0; x0 < ow; ++x0) {
                double* zp = z + (y0 * ow + x0) * oc;
                for (std::size_t c = 0; c < oc; ++c) zp[c] = b[c];
                for (std::size_t kh = 0; kh < k; ++kh) {
                    for (std::size_t kw = 0; kw < k; ++kw) {
                        const double* xp = x + ((y0 + kh) * iw + (x0 + kw)) * ic;
                        const double* wp = w + (kh * k + kw) * ic * oc;
                        for (std::size_t c_in = 0; c_in < ic; ++c_in) {
                            const double xv = xp[c_in];
                            if (xv == 0.0) continue;
                            const double* wrow = wp + c_in * oc;
                            for (std::size_t c = 0; c < oc; ++c) zp[c] += xv * wrow[c];
                        }
                    }
                }
            }
        }
    }
}

void conv_backward(const LayerSpec& spec, const std::vector<double>& p,
                   const Matrix& in, const Matrix& dz, std::vector<double>& gbuf,
                   Matrix* din) {
    const std::size_t n = in.rows;
    const std::size_t ih = spec.in_h, iw = spec.in_w, ic = spec.in_c;
    const std::size_t k = spec.kernel, oc = spec.out_channels;
    const std::size_t oh = spec.out_h(), ow = spec.out_w();
    const double* w = p.data();
    double* gw = gbuf.data();
    double* gb = gbuf.data() + k * k * ic * oc;
    for (std::size_t r = 0; r < n; ++r) {
        const double* x = in.data.data() + r * ih * iw * ic;
        const double* d = dz.data.data() + r * oh * ow * oc;
        double* dx = din ? din->data.data() + r * ih * iw * ic : nullptr;
        for (std::size_t y0 = 0; y0 < oh; ++y0) {
            for (std::size_t x0 = 0; x0 < ow; ++x0) {
                const double* dp = d + (y0 * ow + x0) * oc;
                for (std::size_t c = 0; c < oc; ++c) gb[c] += dp[c];
                for (std::size_t kh = 0; kh < k; ++kh) {
                    for (std::size_t kw = 0; kw < k; ++kw) {
                        const std::size_t xoff = ((y0 + kh) * iw + (x0 + kw)) * ic;
                        const double* xp = x + xoff;
                        double* gwp = gw + (kh * k + kw) * ic * oc;
                        const double* wp = w + (kh * k + kw) * ic * oc;
                        for (std::size_t c_in = 0; c_in < ic; ++c_in) {
                            const double xv = xp[c_in];
                            double* grow = gwp + c_in * oc;
                            const double* wrow = wp + c_in * oc;
                            double acc = 0.0;
                            for (std::size_t c = 0; c < oc; ++c) {
                                grow[c] += xv * dp[c];
                                acc += wrow[c] * dp[c];
                            }
                            if (dx) dx[xoff + c_in] += acc;
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

ForwardCache Model::forward(const LayerKeyedVector& params, const Matrix& batch_inputs) const {
    check_params(params);
    if (batch_inputs.cols != input_dim()) {
        throw ConfigError("batch feature dim " + std::to_string(batch_inputs.cols) +
                          " does not match model input dim " + std::to_string(input_dim()));
    }
    if (batch_inputs.rows == 0) throw ConfigError("empty batch");

    ForwardCache cache;
    cache.params = &params;
    cache.inputs.reserve(specs_.size());
    cache.preacts.reserve(specs_.size());

    Matrix act = batch_inputs;
    for (std::size_t l = 0; l < specs_.size(); ++l) {
        const LayerSpec& spec = specs_[l];
        const auto& p = params.at(spec.layer_id);
        Matrix z(act.rows, spec.output_dim());
        if (spec.kind == LayerKind::dense) {
            dense_forward(spec, p, act, z);
        } else {
            conv_forward(spec, p, act, z);
        }
        cache.inputs.push_back(std::move(act));
        if (l + 1 < specs_.size()) {
            act = z;
            for (double& v : act.data) v = v > 0.0 ? v : 0.0;
        }
        cache.preacts.push_back(std::move(z));
    }
    cache.logits = cache.preacts.back();
    return cache;
}

BackwardResult Model::backward(const ForwardCache& cache, const std::vector<int>& labels) const {
    if (cache.params == nullptr || cache.preacts.size() != specs_.size()) {
        throw InternalError("backward: cache was not produced by this model's forward");
    }
    const Matrix& logits = cache.logits;
    const std::size_t n = logits.rows;
    const std::size_t kc = num_classes();
    if (labels.size() != n) {
        throw InputError("backward: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " samples");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= kc) {
            throw InputError("label " + std::to_string(y) + " out of range [0, " +
                             std::to_string(kc) + ")");
        }
    }

    // Softmax cross-entropy with max-shift; dlogits = (softmax - onehot)/n.
    double loss = 0.0;
    Matrix dz(n, kc);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double* z = logits.data.data() + r * kc;
        double zmax = z[0];
        for (std::size_t j = 1; j < kc; ++j) zmax = std::max(zmax, z[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < kc; ++j) denom += std::exp(z[j] - zmax);
        const double log_denom = std::log(denom);
        const int y = labels[r];
        loss += (log_denom - (z[y] - zmax)) * inv_n;
        double* dp = dz.data.data() + r * kc;
        for (std::size_t j = 0; j < kc; ++j) {
            dp[j] = std::exp(z[j] - zmax) / denom * inv_n;
        }
        dp[y] -= inv_n;
    }

    BackwardResult result;
    result.loss = loss;
    for (const auto& spec : specs_) {
        result.grad[spec.layer_id] = std::vector<double>(spec.param_count, 0.0);
    }

    for (std::size_t li = specs_.size(); li-- > 0;) {
        const LayerSpec& spec = specs_[li];
        const auto& p = cache.params->at(spec.layer_id);
        auto& gbuf = result.grad[spec.layer_id];
        Matrix din;
        Matrix* din_ptr = nullptr;
        if (li > 0) {
            din = Matrix(n, spec.input_dim());
            din_ptr = &din;
        }
        if (spec.kind == LayerKind::dense) {
            dense_backward(spec, p, cache.inputs[li], dz, gbuf, din_ptr);
        } else {
            conv_backward(spec, p, cache.inputs[li], dz, gbuf, din_ptr);
        }
        if (li > 0) {
            // ReLU gate: pass gradient only where the previous pre-activation
            // was strictly positive.
            const Matrix& zprev = cache.preacts[li - 1];
            for (std::size_t i = 0; i < din.data.size(); ++i) {
                if (zprev.data[i] <= 0.0) din.data[i] = 0.0;
            }
            dz = std::move(din);
        }
    }
    return result;
}

EvalMetrics Model::evaluate(const LayerKeyedVector& params, const Matrix& inputs,
                            const std::vector<int>& labels) const {
    if (inputs.rows == 0) throw ConfigError("evaluate: empty input");
    if (labels.size() != inputs.rows) {
        throw InputError("evaluate: label count does not match row count");
    }
    ForwardCache cache = forward(params, inputs);
    const Matrix& logits = cache.logits;
    const std::size_t n = logits.rows;
    const std::size_t kc = num_classes();
    double loss = 0.0;
    std::size_t correct = 0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double* z = logits.data.data() + r * kc;
        const int y = labels[r];
        if (y < 0 || static_cast<std::size_t>(y) >= kc) {
            throw InputError("evaluate: label " + std::to_string(y) + " out of range");
        }
        std::size_t best = 0;
        double zmax = z[0];
        for (std::size_t j = 1; j < kc; ++j) {
            if (z[j] > zmax) {
                zmax = z[j];
                best = j;
            }
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < kc; ++j) denom += std::exp(z[j] - zmax);
        loss += (std::log(denom) - (z[y] - zmax)) * inv_n;
        if (best == static_cast<std::size_t>(y)) ++correct;
    }
    return {loss, static_cast<double>(correct) / static_cast<double>(n)};
}

}  // namespace fedluar
