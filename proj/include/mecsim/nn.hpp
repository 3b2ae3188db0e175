#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "mecsim/rng.hpp"

namespace mecsim {

// Fully connected tanh network over one flat parameter array. Layout per
// layer l: weight matrix (rows = out, cols = in, row-major) followed by the
// bias vector. Hidden activations are tanh, the output layer is linear.
class DenseNet {
public:
    struct Cache {
        // post-activation vector per layer, acts[0] = input
        std::vector<std::vector<double>> acts;
    };

    DenseNet() = default;

    explicit DenseNet(std::vector<int> sizes) : sizes_(std::move(sizes)) {
        if (sizes_.size() < 2) throw std::invalid_argument("DenseNet: need at least input and output layer");
        std::size_t count = 0;
        for (std::size_t l = 1; l < sizes_.size(); ++l)
            count += static_cast<std::size_t>(sizes_[l - 1]) * static_cast<std::size_t>(sizes_[l]) +
                     static_cast<std::size_t>(sizes_[l]);
        params_.assign(count, 0.0);
    }

    void init_xavier(Rng& rng) {
        std::size_t off = 0;
        for (std::size_t l = 1; l < sizes_.size(); ++l) {
            const int in = sizes_[l - 1], out = sizes_[l];
            const double limit = std::sqrt(6.0 / (in + out));
            for (int i = 0; i < out * in; ++i) params_[off + static_cast<std::size_t>(i)] = rng.uniform(-limit, limit);
            off += static_cast<std::size_t>(out) * static_cast<std::size_t>(in);
            for (int i = 0; i < out; ++i) params_[off + static_cast<std::size_t>(i)] = 0.0;
            off += static_cast<std::size_t>(out);
        }
    }

    const std::vector<int>& sizes() const { return sizes_; }
    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    std::size_t param_count() const { return params_.size(); }
    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }

    std::vector<double> forward(std::span<const double> input, Cache* cache = nullptr) const {
        if (static_cast<int>(input.size()) != input_size())
            throw std::invalid_argument("DenseNet::forward: input size mismatch");
        std::vector<double> a(input.begin(), input.end());
        if (cache) {
            cache->acts.clear();
            cache->acts.push_back(a);
        }
        std::size_t off = 0;
        for (std::size_t l = 1; l < sizes_.size(); ++l) {
            const int in = sizes_[l - 1], out = sizes_[l];
            std::vector<double> z(static_cast<std::size_t>(out));
            for (int o = 0; o < out; ++o) {
                const double* wrow = params_.data() + off + static_cast<std::size_t>(o) * in;
                double s = params_[off + static_cast<std::size_t>(out) * in + static_cast<std::size_t>(o)];
                for (int i = 0; i < in; ++i) s += wrow[i] * a[static_cast<std::size_t>(i)];
                z[static_cast<std::size_t>(o)] = s;
            }
            off += static_cast<std::size_t>(out) * in + static_cast<std::size_t>(out);
            if (l + 1 < sizes_.size())
                for (auto& v : z) v = std::tanh(v);
            a = std::move(z);
            if (cache) cache->acts.push_back(a);
        }
        return a;
    }

    // Accumulate parameter gradients for one sample into `grad` (same layout
    // as params) given dL/doutput. Exact reverse mode; tanh' recovered from
    // the cached post-activations.
    void backward(const Cache& cache, std::span<const double> dout, std::span<double> grad) const {
        if (cache.acts.size() != sizes_.size())
            throw std::invalid_argument("DenseNet::backward: stale or missing forward cache");
        if (grad.size() != params_.size())
            throw std::invalid_argument("DenseNet::backward: gradient buffer size mismatch");
        std::vector<double> delta(dout.begin(), dout.end());

        // offsets of each layer's weight block
        std::vector<std::size_t> offs(sizes_.size(), 0);
        std::size_t off = 0;
        for (std::size_t l = 1; l < sizes_.size(); ++l) {
            offs[l] = off;
            off += static_cast<std::size_t>(sizes_[l - 1]) * sizes_[l] + static_cast<std::size_t>(sizes_[l]);
        }

        for (std::size_t l = sizes_.size() - 1; l >= 1; --l) {
            const int in = sizes_[l - 1], out = sizes_[l];
            const auto& a_prev = cache.acts[l - 1];
            const std::size_t wo = offs[l];
            for (int o = 0; o < out; ++o) {
                const double d = delta[static_cast<std::size_t>(o)];
                double* grow = grad.data() + wo + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) grow[i] += d * a_prev[static_cast<std::size_t>(i)];
                grad[wo + static_cast<std::size_t>(out) * in + static_cast<std::size_t>(o)] += d;
            }
            if (l == 1) break;
            std::vector<double> dprev(static_cast<std::size_t>(in), 0.0);
            for (int o = 0; o < out; ++o) {
                const double d = delta[static_cast<std::size_t>(o)];
                const double* wrow = params_.data() + wo + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) dprev[static_cast<std::size_t>(i)] += wrow[i] * d;
            }
            for (int i = 0; i < in; ++i) {
                const double a = cache.acts[l - 1][static_cast<std::size_t>(i)];
                dprev[static_cast<std::size_t>(i)] *= 1.0 - a * a;
            }
            delta = std::move(dprev);
        }
    }

private:
    std::vector<int> sizes_;
    std::vector<double> params_;
};

// Bias-corrected Adam. Non-finite gradients skip the update and report it.
struct AdamState {
    std::vector<double> m, v;
    long step = 0;
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(std::size_t n, double learning_rate = 5e-4)
        : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}

    // returns false when the gradient was non-finite and the step skipped
    bool update(std::span<double> params, std::span<const double> grads) {
        if (params.size() != m.size() || grads.size() != m.size())
            throw std::invalid_argument("AdamState::update: size mismatch");
        for (double g : grads)
            if (!std::isfinite(g)) return false;
        ++step;
        const double c1 = 1.0 - std::pow(beta1, step);
        const double c2 = 1.0 - std::pow(beta2, step);
        for (std::size_t i = 0; i < m.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
            params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
        return true;
    }
};

// --- binary serialization, explicit little-endian ---

namespace io {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated stream");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated stream");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void write_f64(std::ostream& os, double d) { write_u64(os, std::bit_cast<std::uint64_t>(d)); }

inline double read_f64(std::istream& is) { return std::bit_cast<double>(read_u64(is)); }

} // namespace io

inline void write_net(std::ostream& os, const DenseNet& net) {
    io::write_u32(os, static_cast<std::uint32_t>(net.sizes().size()));
    for (int s : net.sizes()) io::write_u32(os, static_cast<std::uint32_t>(s));
    io::write_u64(os, net.param_count());
    for (double p : net.params()) io::write_f64(os, p);
}

inline DenseNet read_net(std::istream& is) {
    const std::uint32_t nl = io::read_u32(is);
    if (nl < 2 || nl > 64) throw std::runtime_error("checkpoint: bad layer count");
    std::vector<int> sizes(nl);
    for (auto& s : sizes) {
        s = static_cast<int>(io::read_u32(is));
        if (s < 1 || s > 1 << 20) throw std::runtime_error("checkpoint: bad layer size");
    }
    DenseNet net(sizes);
    const std::uint64_t count = io::read_u64(is);
    if (count != net.param_count()) throw std::runtime_error("checkpoint: parameter count mismatch");
    for (auto& p : net.params()) p = io::read_f64(is);
    return net;
}

} // namespace mecsim
