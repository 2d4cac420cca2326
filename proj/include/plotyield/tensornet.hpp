#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "plotyield/binio.hpp"
#include "plotyield/error.hpp"

namespace plotyield {

// Dense row-major tensor of up to 4 dimensions.
template <typename T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> data;

    TensorT() = default;
    TensorT(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        require(static_cast<int64_t>(data.size()) == numel(shape), "tensor_shape",
                "tensor data length does not match its shape");
    }

    static int64_t numel(const std::vector<int>& shape) {
        require(!shape.empty() && shape.size() <= 4, "tensor_shape",
                "tensor rank must be between 1 and 4");
        int64_t n = 1;
        for (int d : shape) {
            require(d > 0, "tensor_shape", "tensor dimensions must be positive");
            n *= d;
        }
        return n;
    }

    static TensorT zeros(std::vector<int> shape) {
        int64_t n = numel(shape);
        return TensorT(std::move(shape), std::vector<T>(static_cast<size_t>(n), T(0)));
    }

    static TensorT full(std::vector<int> shape, T v) {
        int64_t n = numel(shape);
        return TensorT(std::move(shape), std::vector<T>(static_cast<size_t>(n), v));
    }

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    T operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }
};

using Tensor = TensorT<double>;

template <typename T>
bool all_finite(const TensorT<T>& t) {
    for (T v : t.data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

namespace detail {

inline int64_t ceil_div(int64_t a, int64_t b) {
    return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}
inline int64_t floor_div(int64_t a, int64_t b) {
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}

struct ConvDims {
    int n, cin, h, w;
    int cout, kh, kw;
    int hout, wout;
};

template <typename T>
ConvDims conv_dims(const TensorT<T>& x, const TensorT<T>& weight, const TensorT<T>& bias,
                   int stride, int pad) {
    require(x.rank() == 4, "conv_shape", "conv2d input must be 4-D (N,C,H,W)");
    require(weight.rank() == 4, "conv_shape", "conv2d weight must be 4-D (Cout,Cin,kH,kW)");
    require(bias.rank() == 1 && bias.dim(0) == weight.dim(0), "conv_shape",
            "conv2d bias must be 1-D of length Cout");
    require(x.dim(1) == weight.dim(1), "conv_shape",
            "conv2d input channels do not match weight channels");
    require(stride >= 1 && pad >= 0, "conv_shape", "conv2d stride must be >=1 and pad >=0");
    ConvDims d;
    d.n = x.dim(0);
    d.cin = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.cout = weight.dim(0);
    d.kh = weight.dim(2);
    d.kw = weight.dim(3);
    d.hout = (d.h + 2 * pad - d.kh) / stride + 1;
    d.wout = (d.w + 2 * pad - d.kw) / stride + 1;
    require(d.h + 2 * pad >= d.kh && d.w + 2 * pad >= d.kw && d.hout > 0 && d.wout > 0,
            "conv_shape", "conv2d output dimensions are not positive");
    return d;
}

}  // namespace detail

// Standard cross-correlation with symmetric zero padding.
// Output H' = floor((H + 2*pad - kH)/stride) + 1.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& weight, const TensorT<T>& bias,
                  int stride = 1, int pad = 0) {
    auto d = detail::conv_dims(x, weight, bias, stride, pad);
    TensorT<T> out = TensorT<T>::zeros({d.n, d.cout, d.hout, d.wout});

    for (int n = 0; n < d.n; ++n)
        for (int co = 0; co < d.cout; ++co) {
            T* obase = &out.data[((static_cast<int64_t>(n) * d.cout + co) * d.hout) * d.wout];
            for (int64_t i = 0; i < static_cast<int64_t>(d.hout) * d.wout; ++i)
                obase[i] = bias[co];
            for (int ci = 0; ci < d.cin; ++ci) {
                const T* xbase =
                    &x.data[((static_cast<int64_t>(n) * d.cin + ci) * d.h) * d.w];
                for (int kh = 0; kh < d.kh; ++kh)
                    for (int kw = 0; kw < d.kw; ++kw) {
                        T wv = weight.data[(((static_cast<int64_t>(co) * d.cin + ci) * d.kh + kh)) *
                                               d.kw +
                                           kw];
                        int ho_lo = static_cast<int>(
                            std::max<int64_t>(0, detail::ceil_div(pad - kh, stride)));
                        int ho_hi = static_cast<int>(std::min<int64_t>(
                            d.hout - 1, detail::floor_div(d.h - 1 + pad - kh, stride)));
                        int wo_lo = static_cast<int>(
                            std::max<int64_t>(0, detail::ceil_div(pad - kw, stride)));
                        int wo_hi = static_cast<int>(std::min<int64_t>(
                            d.wout - 1, detail::floor_div(d.w - 1 + pad - kw, stride)));
                        for (int ho = ho_lo; ho <= ho_hi; ++ho) {
                            const T* xrow = xbase + static_cast<int64_t>(ho * stride - pad + kh) * d.w;
                            T* orow = obase + static_cast<int64_t>(ho) * d.wout;
                            for (int wo = wo_lo; wo <= wo_hi; ++wo)
                                orow[wo] += wv * xrow[wo * stride - pad + kw];
                        }
                    }
            }
        }
    return out;
}

// Gradients of conv2d; any of dx/dw/db may be null. Non-null outputs must be
// pre-sized to the matching operand shape (they are accumulated into).
template <typename T>
void conv2d_backward(const TensorT<T>& x, const TensorT<T>& weight, const TensorT<T>& bias,
                     const TensorT<T>& dout, int stride, int pad, TensorT<T>* dx,
                     TensorT<T>* dw, TensorT<T>* db) {
    auto d = detail::conv_dims(x, weight, bias, stride, pad);
    require(dout.shape == std::vector<int>({d.n, d.cout, d.hout, d.wout}), "conv_shape",
            "conv2d_backward: dout shape mismatch");

    for (int n = 0; n < d.n; ++n)
        for (int co = 0; co < d.cout; ++co) {
            const T* gbase = &dout.data[((static_cast<int64_t>(n) * d.cout + co) * d.hout) * d.wout];
            if (db)
                for (int64_t i = 0; i < static_cast<int64_t>(d.hout) * d.wout; ++i)
                    db->data[co] += gbase[i];
            for (int ci = 0; ci < d.cin; ++ci) {
                const int64_t xoff = ((static_cast<int64_t>(n) * d.cin + ci) * d.h) * d.w;
                for (int kh = 0; kh < d.kh; ++kh)
                    for (int kw = 0; kw < d.kw; ++kw) {
                        const int64_t widx =
                            ((static_cast<int64_t>(co) * d.cin + ci) * d.kh + kh) * d.kw + kw;
                        T wv = weight.data[widx];
                        T dw_acc = T(0);
                        int ho_lo = static_cast<int>(
                            std::max<int64_t>(0, detail::ceil_div(pad - kh, stride)));
                        int ho_hi = static_cast<int>(std::min<int64_t>(
                            d.hout - 1, detail::floor_div(d.h - 1 + pad - kh, stride)));
                        int wo_lo = static_cast<int>(
                            std::max<int64_t>(0, detail::ceil_div(pad - kw, stride)));
                        int wo_hi = static_cast<int>(std::min<int64_t>(
                            d.wout - 1, detail::floor_div(d.w - 1 + pad - kw, stride)));
                        for (int ho = ho_lo; ho <= ho_hi; ++ho) {
                            const int hi = ho * stride - pad + kh;
                            const T* grow = gbase + static_cast<int64_t>(ho) * d.wout;
                            const T* xrow = &x.data[xoff + static_cast<int64_t>(hi) * d.w];
                            T* dxrow = dx ? &dx->data[xoff + static_cast<int64_t>(hi) * d.w] : nullptr;
                            for (int wo = wo_lo; wo <= wo_hi; ++wo) {
                                const int wi = wo * stride - pad + kw;
                                dw_acc += grow[wo] * xrow[wi];
                                if (dxrow) dxrow[wi] += wv * grow[wo];
                            }
                        }
                        if (dw) dw->data[widx] += dw_acc;
                    }
            }
        }
}

template <typename T>
struct PoolResult {
    TensorT<T> out;
    std::vector<int64_t> argmax;  // flat source index per output element
};

// Window maxima without padding; ties pick the first index in row-major
// window order so gradients have a stable route.
template <typename T>
PoolResult<T> maxpool2d_with_indices(const TensorT<T>& x, int k, int stride) {
    require(x.rank() == 4, "pool_shape", "maxpool2d input must be 4-D (N,C,H,W)");
    require(k >= 1 && stride >= 1, "pool_shape", "maxpool2d kernel and stride must be >= 1");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    require(h >= k && w >= k, "pool_shape", "maxpool2d window exceeds input size");
    const int hout = (h - k) / stride + 1;
    const int wout = (w - k) / stride + 1;

    PoolResult<T> res;
    res.out = TensorT<T>::zeros({n, c, hout, wout});
    res.argmax.resize(static_cast<size_t>(res.out.size()));
    int64_t oi = 0;
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) {
            const int64_t base = ((static_cast<int64_t>(ni) * c + ci) * h) * w;
            for (int ho = 0; ho < hout; ++ho)
                for (int wo = 0; wo < wout; ++wo, ++oi) {
                    int64_t best_idx = base + static_cast<int64_t>(ho * stride) * w + wo * stride;
                    T best = x.data[best_idx];
                    for (int kh = 0; kh < k; ++kh)
                        for (int kw = 0; kw < k; ++kw) {
                            int64_t idx =
                                base + static_cast<int64_t>(ho * stride + kh) * w + wo * stride + kw;
                            if (x.data[idx] > best) {
                                best = x.data[idx];
                                best_idx = idx;
                            }
                        }
                    res.out.data[oi] = best;
                    res.argmax[oi] = best_idx;
                }
        }
    return res;
}

template <typename T>
TensorT<T> maxpool2d(const TensorT<T>& x, int k, int stride) {
    return maxpool2d_with_indices(x, k, stride).out;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> out = x;
    for (T& v : out.data)
        if (v < T(0)) v = T(0);
    return out;
}

// Affine map y = x W^T + b with x (N, Fin), W (Fout, Fin), b (Fout).
template <typename T>
TensorT<T> fc(const TensorT<T>& x, const TensorT<T>& weight, const TensorT<T>& bias) {
    require(x.rank() == 2, "fc_shape", "fc input must be 2-D (N, features)");
    require(weight.rank() == 2 && bias.rank() == 1, "fc_shape",
            "fc weight must be 2-D and bias 1-D");
    const int n = x.dim(0), fin = x.dim(1);
    const int fout = weight.dim(0);
    require(weight.dim(1) == fin, "fc_shape", "fc weight columns do not match input features");
    require(bias.dim(0) == fout, "fc_shape", "fc bias length does not match output features");

    TensorT<T> out = TensorT<T>::zeros({n, fout});
    for (int i = 0; i < n; ++i) {
        const T* xrow = &x.data[static_cast<int64_t>(i) * fin];
        for (int o = 0; o < fout; ++o) {
            const T* wrow = &weight.data[static_cast<int64_t>(o) * fin];
            T acc = bias[o];
            for (int j = 0; j < fin; ++j) acc += xrow[j] * wrow[j];
            out.data[static_cast<int64_t>(i) * fout + o] = acc;
        }
    }
    return out;
}

// Mean of squared differences over all elements.
template <typename T>
T mse(const TensorT<T>& pred, const TensorT<T>& target) {
    require(pred.shape == target.shape, "mse_shape", "mse operands must share a shape");
    T acc = T(0);
    for (int64_t i = 0; i < pred.size(); ++i) {
        T d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<T>(pred.size());
}

// ---------------------------------------------------------------------------
// Reverse-mode tape
// ---------------------------------------------------------------------------

// Records forward ops over value tensors and replays them backwards.
// Parameters are leaves created with parameter(); their gradients are read
// back after backward(). The graph is rebuilt per forward pass.
template <typename T>
class GraphT {
public:
    using NodeId = int;

    GraphT() = default;
    GraphT(const GraphT&) = delete;
    GraphT& operator=(const GraphT&) = delete;

    NodeId input(TensorT<T> value) { return add_leaf(std::move(value), false); }
    NodeId parameter(TensorT<T> value) { return add_leaf(std::move(value), true); }

    NodeId conv2d(NodeId x, NodeId w, NodeId b, int stride = 1, int pad = 0) {
        TensorT<T> value = plotyield::conv2d(node(x).value, node(w).value, node(b).value,
                                             stride, pad);
        NodeId id = add_op(std::move(value), {x, w, b});
        nodes_[id].backprop = [this, id, x, w, b, stride, pad]() {
            conv2d_backward(node(x).value, node(w).value, node(b).value, node(id).grad,
                            stride, pad, node(x).requires_grad ? &node(x).grad : nullptr,
                            node(w).requires_grad ? &node(w).grad : nullptr,
                            node(b).requires_grad ? &node(b).grad : nullptr);
        };
        return id;
    }

    NodeId maxpool2d(NodeId x, int k, int stride) {
        PoolResult<T> res = maxpool2d_with_indices(node(x).value, k, stride);
        NodeId id = add_op(std::move(res.out), {x});
        nodes_[id].backprop = [this, id, x, argmax = std::move(res.argmax)]() {
            if (!node(x).requires_grad) return;
            auto& g = node(id).grad;
            auto& gx = node(x).grad;
            for (int64_t i = 0; i < g.size(); ++i) gx.data[argmax[i]] += g[i];
        };
        return id;
    }

    NodeId relu(NodeId x) {
        TensorT<T> value = plotyield::relu(node(x).value);
        NodeId id = add_op(std::move(value), {x});
        nodes_[id].backprop = [this, id, x]() {
            if (!node(x).requires_grad) return;
            const auto& xin = node(x).value;
            const auto& g = node(id).grad;
            auto& gx = node(x).grad;
            for (int64_t i = 0; i < g.size(); ++i)
                if (xin[i] > T(0)) gx.data[i] += g[i];
        };
        return id;
    }

    NodeId reshape(NodeId x, std::vector<int> shape) {
        require(TensorT<T>::numel(shape) == node(x).value.size(), "reshape",
                "reshape must preserve the element count");
        TensorT<T> value(shape, node(x).value.data);
        NodeId id = add_op(std::move(value), {x});
        nodes_[id].backprop = [this, id, x]() {
            if (!node(x).requires_grad) return;
            const auto& g = node(id).grad;
            auto& gx = node(x).grad;
            for (int64_t i = 0; i < g.size(); ++i) gx.data[i] += g[i];
        };
        return id;
    }

    NodeId fc(NodeId x, NodeId w, NodeId b) {
        TensorT<T> value = plotyield::fc(node(x).value, node(w).value, node(b).value);
        NodeId id = add_op(std::move(value), {x, w, b});
        nodes_[id].backprop = [this, id, x, w, b]() {
            const auto& g = node(id).grad;
            const auto& xv = node(x).value;
            const auto& wv = node(w).value;
            const int n = xv.dim(0), fin = xv.dim(1), fout = wv.dim(0);
            if (node(x).requires_grad) {
                auto& gx = node(x).grad;
                for (int i = 0; i < n; ++i)
                    for (int o = 0; o < fout; ++o) {
                        T gv = g.data[static_cast<int64_t>(i) * fout + o];
                        for (int j = 0; j < fin; ++j)
                            gx.data[static_cast<int64_t>(i) * fin + j] +=
                                gv * wv.data[static_cast<int64_t>(o) * fin + j];
                    }
            }
            if (node(w).requires_grad) {
                auto& gw = node(w).grad;
                for (int i = 0; i < n; ++i)
                    for (int o = 0; o < fout; ++o) {
                        T gv = g.data[static_cast<int64_t>(i) * fout + o];
                        for (int j = 0; j < fin; ++j)
                            gw.data[static_cast<int64_t>(o) * fin + j] +=
                                gv * xv.data[static_cast<int64_t>(i) * fin + j];
                    }
            }
            if (node(b).requires_grad) {
                auto& gb = node(b).grad;
                for (int i = 0; i < n; ++i)
                    for (int o = 0; o < fout; ++o)
                        gb.data[o] += g.data[static_cast<int64_t>(i) * fout + o];
            }
        };
        return id;
    }

    NodeId mse(NodeId pred, NodeId target) {
        T value = plotyield::mse(node(pred).value, node(target).value);
        NodeId id = add_op(TensorT<T>({1}, {value}), {pred, target});
        nodes_[id].backprop = [this, id, pred, target]() {
            const T gscale = node(id).grad[0];
            const auto& p = node(pred).value;
            const auto& t = node(target).value;
            const T inv_n = T(1) / static_cast<T>(p.size());
            if (node(pred).requires_grad) {
                auto& gp = node(pred).grad;
                for (int64_t i = 0; i < p.size(); ++i)
                    gp.data[i] += gscale * T(2) * (p[i] - t[i]) * inv_n;
            }
            if (node(target).requires_grad) {
                auto& gt = node(target).grad;
                for (int64_t i = 0; i < p.size(); ++i)
                    gt.data[i] -= gscale * T(2) * (p[i] - t[i]) * inv_n;
            }
        };
        return id;
    }

    const TensorT<T>& value(NodeId id) const { return node(id).value; }
    const TensorT<T>& grad(NodeId id) const {
        const Node& n = node(id);
        require(!n.grad.shape.empty(), "missing_backward",
                "gradient requested before backward()");
        return n.grad;
    }

    // Reverse pass from a recorded scalar loss node.
    void backward(NodeId loss) {
        require(!nodes_.empty(), "missing_forward", "backward() called on an empty graph");
        const Node& l = node(loss);
        require(l.value.size() == 1, "backward_scalar", "backward() requires a scalar loss");
        for (Node& n : nodes_)
            if (n.requires_grad) n.grad = TensorT<T>::zeros(n.value.shape);
        node(loss).grad = TensorT<T>::full(l.value.shape, T(1));
        for (NodeId id = loss; id >= 0; --id) {
            Node& n = nodes_[static_cast<size_t>(id)];
            if (n.requires_grad && n.backprop) n.backprop();
        }
    }

    int node_count() const { return static_cast<int>(nodes_.size()); }

private:
    struct Node {
        TensorT<T> value;
        TensorT<T> grad;
        bool requires_grad = false;
        std::function<void()> backprop;
    };

    Node& node(NodeId id) {
        require(id >= 0 && id < static_cast<NodeId>(nodes_.size()), "missing_forward",
                "node id was not recorded in this graph");
        return nodes_[static_cast<size_t>(id)];
    }
    const Node& node(NodeId id) const {
        require(id >= 0 && id < static_cast<NodeId>(nodes_.size()), "missing_forward",
                "node id was not recorded in this graph");
        return nodes_[static_cast<size_t>(id)];
    }

    NodeId add_leaf(TensorT<T> value, bool requires_grad) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    NodeId add_op(TensorT<T> value, std::initializer_list<NodeId> parents) {
        Node n;
        n.value = std::move(value);
        for (NodeId p : parents) n.requires_grad = n.requires_grad || node(p).requires_grad;
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
};

using Graph = GraphT<double>;

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <typename T>
struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t step_count = 0;
    std::vector<TensorT<T>> m, v;
};

// One Adam update with bias correction. Moment tensors are created on the
// first call and must keep matching the parameter list afterwards.
template <typename T>
void adam_step(const std::vector<TensorT<T>*>& params,
               const std::vector<const TensorT<T>*>& grads, AdamState<T>& st) {
    require(params.size() == grads.size(), "adam_args",
            "adam_step needs one gradient per parameter");
    if (st.m.empty()) {
        for (const TensorT<T>* p : params) {
            st.m.push_back(TensorT<T>::zeros(p->shape));
            st.v.push_back(TensorT<T>::zeros(p->shape));
        }
    }
    require(st.m.size() == params.size(), "adam_state",
            "adam state does not match the parameter list");

    st.step_count += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step_count));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step_count));
    for (size_t i = 0; i < params.size(); ++i) {
        TensorT<T>& p = *params[i];
        const TensorT<T>& g = *grads[i];
        require(p.shape == st.m[i].shape && p.shape == g.shape, "adam_state",
                "parameter/gradient shape changed between adam steps");
        for (int64_t j = 0; j < p.size(); ++j) {
            double gj = static_cast<double>(g[j]);
            double mj = st.beta1 * static_cast<double>(st.m[i][j]) + (1.0 - st.beta1) * gj;
            double vj = st.beta2 * static_cast<double>(st.v[i][j]) + (1.0 - st.beta2) * gj * gj;
            st.m[i][j] = static_cast<T>(mj);
            st.v[i][j] = static_cast<T>(vj);
            double mhat = mj / bc1;
            double vhat = vj / bc2;
            p[j] = static_cast<T>(static_cast<double>(p[j]) -
                                  st.lr * mhat / (std::sqrt(vhat) + st.eps));
        }
    }
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

// He-style uniform init: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
template <typename T>
TensorT<T> he_uniform(std::vector<int> shape, int64_t fan_in, std::mt19937_64& rng) {
    require(fan_in > 0, "init_fan_in", "fan-in must be positive");
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    TensorT<T> t = TensorT<T>::zeros(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(dist(rng));
    return t;
}

// ---------------------------------------------------------------------------
// Checkpoints
// Layout: magic "YWTS", u32 version (=1), u32 tensor count, then per tensor:
// u32 name length, name bytes, u32 rank, u32 dims..., row-major f32 payload,
// all little-endian.
// ---------------------------------------------------------------------------

template <typename T>
void save_checkpoint(std::ostream& out,
                     const std::vector<std::pair<std::string, TensorT<T>>>& tensors) {
    out.write("YWTS", 4);
    binio::put_u32le(out, 1);
    binio::put_u32le(out, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        binio::put_u32le(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        binio::put_u32le(out, static_cast<uint32_t>(t.shape.size()));
        for (int d : t.shape) binio::put_u32le(out, static_cast<uint32_t>(d));
        for (T v : t.data) binio::put_f32le(out, static_cast<float>(v));
    }
}

template <typename T>
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, TensorT<T>>>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("io_open", "cannot open checkpoint for writing: " + path);
    save_checkpoint(out, tensors);
    if (!out) fail("io_write", "failed writing checkpoint: " + path);
}

template <typename T>
std::vector<std::pair<std::string, TensorT<T>>> load_checkpoint(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "YWTS", 4) != 0)
        fail("ckpt_magic", "not a checkpoint stream (bad magic)");
    uint32_t version = binio::get_u32le(in, "version");
    require(version == 1, "ckpt_version", "unsupported checkpoint version");
    uint32_t count = binio::get_u32le(in, "tensor count");
    std::vector<std::pair<std::string, TensorT<T>>> tensors;
    tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = binio::get_u32le(in, "name length");
        require(name_len <= 4096, "ckpt_name", "implausible tensor name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) fail("bin_truncated", "truncated checkpoint while reading a name");
        uint32_t rank = binio::get_u32le(in, "rank");
        require(rank >= 1 && rank <= 4, "ckpt_shape", "checkpoint tensor rank out of range");
        std::vector<int> shape(rank);
        for (auto& d : shape) d = static_cast<int>(binio::get_u32le(in, "dimension"));
        TensorT<T> t = TensorT<T>::zeros(shape);
        for (auto& v : t.data) v = static_cast<T>(binio::get_f32le(in, "payload"));
        tensors.emplace_back(std::move(name), std::move(t));
    }
    return tensors;
}

template <typename T>
std::vector<std::pair<std::string, TensorT<T>>> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("io_open", "cannot open checkpoint: " + path);
    return load_checkpoint<T>(in);
}

}  // namespace plotyield
