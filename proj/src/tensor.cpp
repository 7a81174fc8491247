#include "partsum/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace partsum {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "{";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << "}";
    return os.str();
}

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int e : s) n *= static_cast<std::size_t>(e);
    return n;
}

namespace {

void require_valid_shape(const Shape& s, const char* op) {
    if (s.empty()) throw ShapeError(std::string(op) + ": empty shape");
    for (int e : s) {
        if (e <= 0) throw ShapeError(std::string(op) + ": non-positive extent in " + shape_str(s));
    }
}

void require_ndim(const Tensor& t, int n, const char* op) {
    if (t.ndim() != n) {
        throw ShapeError(std::string(op) + ": expected " + std::to_string(n) + "-d tensor, got " +
                         shape_str(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

}  // namespace

// --- Tensor basics ----------------------------------------------------------

Tensor make_op_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                      std::function<void(const std::vector<double>&, const std::vector<Tensor>&)> backward,
                      const char* op_name) {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->op_name = op_name;
    bool needs_grad = false;
    for (const Tensor& p : parents) needs_grad = needs_grad || p.requires_grad();
    impl->requires_grad = needs_grad;
    if (needs_grad) {
        impl->parents = std::move(parents);
        impl->backward = std::move(backward);
    }
    return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    require_valid_shape(shape, "zeros");
    std::vector<double> d(shape_numel(shape), 0.0);
    return from_data(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    require_valid_shape(shape, "full");
    std::vector<double> d(shape_numel(shape), value);
    return from_data(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    require_valid_shape(shape, "from_data");
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("from_data: shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " + std::to_string(data.size()));
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
int Tensor::ndim() const { return static_cast<int>(impl_->shape.size()); }
int Tensor::dim(int i) const { return impl_->shape.at(static_cast<std::size_t>(i)); }
std::size_t Tensor::numel() const { return impl_->data.size(); }

int Tensor::rows() const {
    return static_cast<int>(numel() / static_cast<std::size_t>(cols()));
}

int Tensor::cols() const { return impl_->shape.back(); }

const std::vector<double>& Tensor::data() const { return impl_->data; }
std::vector<double>& Tensor::mutable_data() { return impl_->data; }

double Tensor::item() const {
    if (numel() != 1) throw ContractError("item: tensor is not scalar, shape " + shape_str(shape()));
    return impl_->data[0];
}

double Tensor::at(std::size_t flat_index) const { return impl_->data.at(flat_index); }

bool Tensor::requires_grad() const { return impl_->requires_grad; }

const std::vector<double>& Tensor::grad() const {
    impl_->ensure_grad();
    return impl_->grad;
}

void Tensor::zero_grad() {
    impl_->grad.assign(impl_->data.size(), 0.0);
}

namespace detail {

void TensorImpl::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void TensorImpl::accumulate_grad(const std::vector<double>& g) {
    ensure_grad();
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
}

}  // namespace detail

void backward(const Tensor& root) {
    if (root.numel() != 1) {
        throw ContractError("backward: root must be scalar, shape " + shape_str(root.shape()));
    }
    if (!root.requires_grad()) return;

    // Post-order DFS; reversing the order yields outputs-before-inputs.
    std::vector<detail::TensorImpl*> topo;
    std::unordered_set<detail::TensorImpl*> visited;
    struct Frame {
        detail::TensorImpl* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root.impl(), 0});
    visited.insert(root.impl());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            detail::TensorImpl* p = f.node->parents[f.next_parent++].impl();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            topo.push_back(f.node);
            stack.pop_back();
        }
    }

    root.impl()->ensure_grad();
    root.impl()->grad[0] += 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        detail::TensorImpl* node = *it;
        if (node->backward) {
            node->ensure_grad();
            node->backward(node->grad, node->parents);
        }
    }
}

BoolMask BoolMask::all_allowed(int rows, int cols) {
    BoolMask m;
    m.rows = rows;
    m.cols = cols;
    m.allow.assign(static_cast<std::size_t>(rows) * cols, 1);
    return m;
}

// --- ops ---------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_ndim(a, 2, "matmul");
    require_ndim(b, 2, "matmul");
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) {
        throw ShapeError("matmul: inner extents differ: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    {
        const double* A = a.data().data();
        const double* B = b.data().data();
        double* C = out.data();
        for (int i = 0; i < m; ++i) {
            const double* arow = A + static_cast<std::size_t>(i) * k;
            double* crow = C + static_cast<std::size_t>(i) * n;
            for (int kk = 0; kk < k; ++kk) {
                const double av = arow[kk];
                const double* brow = B + static_cast<std::size_t>(kk) * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }
    auto bw = [m, k, n](const std::vector<double>& g, const std::vector<Tensor>& ps) {
        const Tensor& a_ = ps[0];
        const Tensor& b_ = ps[1];
        if (a_.requires_grad()) {
            a_.impl()->ensure_grad();
            double* da = a_.impl()->grad.data();
            const double* B = b_.data().data();
            for (int i = 0; i < m; ++i) {
                const double* grow = g.data() + static_cast<std::size_t>(i) * n;
                double* darow = da + static_cast<std::size_t>(i) * k;
                for (int kk = 0; kk < k; ++kk) {
                    const double* brow = B + static_cast<std::size_t>(kk) * n;
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    darow[kk] += acc;
                }
            }
        }
        if (b_.requires_grad()) {
            b_.impl()->ensure_grad();
            double* db = b_.impl()->grad.data();
            const double* A = a_.data().data();
            for (int i = 0; i < m; ++i) {
                const double* arow = A + static_cast<std::size_t>(i) * k;
                const double* grow = g.data() + static_cast<std::size_t>(i) * n;
                for (int kk = 0; kk < k; ++kk) {
                    const double av = arow[kk];
                    double* dbrow = db + static_cast<std::size_t>(kk) * n;
                    for (int j = 0; j < n; ++j) dbrow[j] += av * grow[j];
                }
            }
        }
    };
    return make_op_result({m, n}, std::move(out), {a, b}, std::move(bw), "matmul");
}

namespace {

template <typename Fwd, typename Bwd>
Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Bwd bwd) {
    require_same_shape(a, b, name);
    const std::size_t n = a.numel();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(a.data()[i], b.data()[i]);
    auto closure = [bwd, n](const std::vector<double>& g, const std::vector<Tensor>& ps) {
        const Tensor& a_ = ps[0];
        const Tensor& b_ = ps[1];
        const bool ga = a_.requires_grad(), gb = b_.requires_grad();
        if (ga) a_.impl()->ensure_grad();
        if (gb) b_.impl()->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
            double da = 0.0, db = 0.0;
            bwd(a_.data()[i], b_.data()[i], g[i], da, db);
            if (ga) a_.impl()->grad[i] += da;
            if (gb) b_.impl()->grad[i] += db;
        }
    };
    return make_op_result(a.shape(), std::move(out), {a, b}, std::move(closure), name);
}

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(const Tensor& x, const char* name, Fwd fwd, Bwd bwd) {
    const std::size_t n = x.numel();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(x.data()[i]);
    auto closure = [bwd, n](const std::vector<double>& g, const std::vector<Tensor>& ps) {
        const Tensor& x_ = ps[0];
        if (!x_.requires_grad()) return;
        x_.impl()->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) x_.impl()->grad[i] += bwd(x_.data()[i]) * g[i];
    };
    return make_op_result(x.shape(), std::move(out), {x}, std::move(closure), name);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = g;
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = -g;
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double x, double y, double g, double& da, double& db) {
            da = g * y;
            db = g * x;
        });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "div", [](double x, double y) { return x / y; },
        [](double x, double y, double g, double& da, double& db) {
            da = g / y;
            db = -g * x / (y * y);
        });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "minimum", [](double x, double y) { return x <= y ? x : y; },
        [](double x, double y, double g, double& da, double& db) {
            if (x <= y)
                da = g;
            else
                db = g;
        });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "maximum", [](double x, double y) { return x >= y ? x : y; },
        [](double x, double y, double g, double& da, double& db) {
            if (x >= y)
                da = g;
            else
                db = g;
        });
}

Tensor scale(const Tensor& a, double s) {
    return unary_elementwise(
        a, "scale", [s](double x) { return s * x; }, [s](double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary_elementwise(
        a, "add_scalar", [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Tensor add_rowwise(const Tensor& x, const Tensor& row) {
    require_ndim(row, 1, "add_rowwise");
    const int d = x.cols();
    if (row.dim(0) != d) {
        throw ShapeError("add_rowwise: last extent mismatch: " + shape_str(x.shape()) + " vs " +
                         shape_str(row.shape()));
    }
    const int r = x.rows();
    std::vector<double> out(x.numel());
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < d; ++j)
            out[static_cast<std::size_t>(i) * d + j] = x.data()[static_cast<std::size_t>(i) * d + j] + row.data()[j];
    auto bw = [r, d](const std::vector<double>& g, const std::vector<Tensor>& ps) {
        const Tensor& x_ = ps[0];
        const Tensor& row_ = ps[1];
        if (x_.requires_grad()) x_.impl()->accumulate_grad(g);
        if (row_.requires_grad()) {
            row_.impl()->ensure_grad();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < d; ++j) row_.impl()->grad[j] += g[static_cast<std::size_t>(i) * d + j];
        }
    };
    return make_op_result(x.shape(), std::move(out), {x, row}, std::move(bw), "add_rowwise");
}

Tensor relu(const Tensor& x) {
    return unary_elementwise(
        x, "relu", [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
    auto sig = [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
    };
    return unary_elementwise(x, "sigmoid", sig, [sig](double v) {
        const double y = sig(v);
        return y * (1.0 - y);
    });
}

Tensor log(const Tensor& x) {
    return unary_elementwise(
        x, "log", [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

Tensor abs(const Tensor& x) {
    return unary_elementwise(
        x, "abs", [](double v) { return std::fabs(v); },
        [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor clamp01_straight_through(const Tensor& x) {
    return unary_elementwise(
        x, "clamp01_straight_through", [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); },
        [](double) { return 1.0; });
}

namespace {

Tensor softmax_impl(const Tensor& x, const BoolMask* mask, const char* name) {
    const int cols = x.cols();
    const int rows = x.rows();
    if (cols < 1) throw ShapeError(std::string(name) + ": last extent must be >= 1");
    if (mask && (mask->rows != rows || mask->cols != cols)) {
        throw ShapeError(std::string(name) + ": mask is " + std::to_string(mask->rows) + "x" +
                         std::to_string(mask->cols) + ", tensor rows/cols " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    }
    std::vector<double> out(x.numel(), 0.0);
    for (int r = 0; r < rows; ++r) {
        const double* in = x.data().data() + static_cast<std::size_t>(r) * cols;
        double* o = out.data() + static_cast<std::size_t>(r) * cols;
        double mx = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < cols; ++c) {
            if (mask && !mask->at(r, c)) continue;
            mx = std::max(mx, in[c]);
        }
        if (mx == -std::numeric_limits<double>::infinity()) {
            throw ContractError(std::string(name) + ": fully masked row " + std::to_string(r));
        }
        double sum = 0.0;
        for (int c = 0; c < cols; ++c) {
            if (mask && !mask->at(r, c)) continue;
            o[c] = std::exp(in[c] - mx);
            sum += o[c];
        }
        for (int c = 0; c < cols; ++c) o[c] /= sum;
    }
    std::vector<double> y = out;  // captured for the backward pass
    auto bw = [rows, cols, y](const std::vector<double>& g, const std::vector<Tensor>& ps) {
        const Tensor& x_ = ps[0];
        if (!x_.requires_grad()) return;
        x_.impl()->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            const std::size_t base = static_cast<std::size_t>(r) * cols;
            double dot = 0.0;
            for (int c = 0; c < cols; ++c) dot += g[base + c] * y[base + c];
            for (int c = 0; c < cols; ++c) x_.impl()->grad[base + c] += y[base + c] * (g[base + c] - dot);
        }
    };
    return make_op_result(x.shape(), std::move(out), {x}, std::move(bw), name);
}

}  // namespace

Tensor softmax_rows(const Tensor& x) { return softmax_impl(x, nullptr, "softmax_rows"); }

Tensor softmax_rows(const Tensor& x, const BoolMask& mask) { return softmax_impl(x, &mask, "softmax_rows"); }

Tensor log_softmax_rows(const Tensor& x) {
    const int cols = x.cols();
    const int rows = x.rows();
    if (cols < 1) throw ShapeError("log_softmax_rows: last extent must be >= 1");
    std::vector<double> out(x.numel());
    for (int r = 0; r < rows; ++r) {
        const double* in = x.data().data() + static_cast<std::size_t>(r) * cols;
        double* o = out.data() + static_cast<std::size_t>(r) * cols;
        double mx = in[0];
        for (int c = 1; c < cols; ++c) mx = std::max(mx, in[c]);
        double sum = 0.0;
        for (int c = 0; c < cols; ++c) sum += std::exp(in[c] - mx);
        const double lse = mx + std::log(sum);
        for (int c = 0; c < cols; ++c) o[c] = in[c] - lse;
    }
    std::vector<double> y = out;
    auto bw = [rows, cols, y](const std::vector<double>& g, const std::vector<Tensor>& ps) {
        const Tensor& x_ = ps[0];
        if (!x_.requires_grad()) return;
        x_.impl()->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            const std::size_t base = static_cast<std::size_t>(r) * cols;
            double gsum = 0.0;
            for (int c = 0; c < cols; ++c) gsum += g[base + c];
            for (int c = 0; c < cols; ++c)
                x_.impl()->grad[base + c] += g[base + c] - std::exp(y[base + c]) * gsum;
        }
    };
    return make_op_result(x.shape(), std::move(out), {x}, std::move(bw), "log_softmax_rows");
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const int d = x.cols();
    if (d < 2) throw ShapeError("layer_norm: last extent must be >= 2, got " + shape_str(x.shape()));
    require_ndim(gain, 1, "layer_norm");
    require_ndim(bias, 1, "layer_norm");
    if (gain.dim(0) != d || bias.dim(0) != d) {
        throw ShapeError("layer_norm: gain/bias extent mismatch: " + shape_str(x.shape()) + " vs " +
                         shape_str(gain.shape()) + "/" + shape_str(bias.shape()));
    }
    const int rows = x.rows();
    std::vector<double> out(x.numel());
    std::vector<double> xhat(x.numel());
    std::vector<double> inv_std(rows);
    for (int r = 0; r < rows; ++r) {
        const double* in = x.data().data() + static_cast<std::size_t>(r) * d;
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += in[j];
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
        var /= d;
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std[r] = inv;
        for (int j = 0; j < d; ++j) {
            const std::size_t k = static_cast<std::size_t>(r) * d + j;
            xhat[k] = (in[j] - mu) * inv;
            out[k] = gain.data()[j] * xhat[k] + bias.data()[j];
        }
    }
    auto bw = [rows, d, xhat, inv_std](const std::vector<double>& g, const std::vector<Tensor>& ps) {
        const Tensor& x_ = ps[0];
        const Tensor& gain_ = ps[1];
        const Tensor& bias_ = ps[2];
        if (gain_.requires_grad()) {
            gain_.impl()->ensure_grad();
            for (int r = 0; r < rows; ++r)
                for (int j = 0; j < d; ++j)
                    gain_.impl()->grad[j] += g[static_cast<std::size_t>(r) * d + j] * xhat[static_cast<std::size_t>(r) * d + j];
        }
        if (bias_.requires_grad()) {
            bias_.impl()->ensure_grad();
            for (int r = 0; r < rows; ++r)
                for (int j = 0; j < d; ++j) bias_.impl()->grad[j] += g[static_cast<std::size_t>(r) * d + j];
        }
        if (x_.requires_grad()) {
            x_.impl()->ensure_grad();
            for (int r = 0; r < rows; ++r) {
                const std::size_t base = static_cast<std::size_t>(r) * d;
                // dxhat = g * gain; dx via the two reduction terms of the
                // normalized-vector derivative.
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double dxh = g[base + j] * gain_.data()[j];
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * xhat[base + j];
                }
                for (int j = 0; j < d; ++j) {
                    const double dxh = g[base + j] * gain_.data()[j];
                    x_.impl()->grad[base + j] +=
                        inv_std[r] * (dxh - sum_dxhat / d - xhat[base + j] * sum_dxhat_xhat / d);
                }
            }
        }
    };
    return make_op_result(x.shape(), std::move(out), {x, gain, bias}, std::move(bw), "layer_norm");
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const int rows = parts[0].rows();
    Shape lead = parts[0].shape();
    lead.pop_back();
    int total = 0;
    for (const Tensor& p : parts) {
        Shape pl = p.shape();
        pl.pop_back();
        if (pl != lead) {
            throw ShapeError("concat_cols: leading shape mismatch: " + shape_str(parts[0].shape()) + " vs " +
                             shape_str(p.shape()));
        }
        total += p.cols();
    }
    Shape out_shape = lead;
    out_shape.push_back(total);
    std::vector<double> out(static_cast<std::size_t>(rows) * total);
    int off = 0;
    for (const Tensor& p : parts) {
        const int c = p.cols();
        for (int r = 0; r < rows; ++r)
            std::copy_n(p.data().data() + static_cast<std::size_t>(r) * c, c,
                        out.data() + static_cast<std::size_t>(r) * total + off);
        off += c;
    }
    auto bw = [rows, total](const std::vector<double>& g, const std::vector<Tensor>& ps) {
        int o = 0;
        for (const Tensor& p : ps) {
            const int c = p.cols();
            if (p.requires_grad()) {
                p.impl()->ensure_grad();
                for (int r = 0; r < rows; ++r)
                    for (int j = 0; j < c; ++j)
                        p.impl()->grad[static_cast<std::size_t>(r) * c + j] +=
                            g[static_cast<std::size_t>(r) * total + o + j];
            }
            o += c;
        }
    };
    return make_op_result(std::move(out_shape), std::move(out), parts, std::move(bw), "concat_cols");
}

Tensor slice_cols(const Tensor& x, int start, int count) {
    const int c = x.cols();
    if (start < 0 || count < 1 || start + count > c) {
        throw ShapeError("slice_cols: range [" + std::to_string(start) + "," + std::to_string(start + count) +
                         ") out of " + shape_str(x.shape()));
    }
    const int rows = x.rows();
    Shape out_shape = x.shape();
    out_shape.back() = count;
    std::vector<double> out(static_cast<std::size_t>(rows) * count);
    for (int r = 0; r < rows; ++r)
        std::copy_n(x.data().data() + static_cast<std::size_t>(r) * c + start, count,
                    out.data() + static_cast<std::size_t>(r) * count);
    auto bw = [rows, c, start, count](const std::vector<double>& g, const std::vector<Tensor>& ps) {
        const Tensor& x_ = ps[0];
        if (!x_.requires_grad()) return;
        x_.impl()->ensure_grad();
        for (int r = 0; r < rows; ++r)
            for (int j = 0; j < count; ++j)
                x_.impl()->grad[static_cast<std::size_t>(r) * c + start + j] +=
                    g[static_cast<std::size_t>(r) * count + j];
    };
    return make_op_result(std::move(out_shape), std::move(out), {x}, std::move(bw), "slice_cols");
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const int c = parts[0].cols();
    int rows = 0;
    for (const Tensor& p : parts) {
        require_ndim(p, 2, "concat_rows");
        if (p.cols() != c) {
            throw ShapeError("concat_rows: column mismatch: " + shape_str(parts[0].shape()) + " vs " +
                             shape_str(p.shape()));
        }
        rows += p.dim(0);
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(rows) * c);
    for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    auto bw = [](const std::vector<double>& g, const std::vector<Tensor>& ps) {
        std::size_t off = 0;
        for (const Tensor& p : ps) {
            if (p.requires_grad()) {
                p.impl()->ensure_grad();
                for (std::size_t i = 0; i < p.numel(); ++i) p.impl()->grad[i] += g[off + i];
            }
            off += p.numel();
        }
    };
    return make_op_result({rows, c}, std::move(out), parts, std::move(bw), "concat_rows");
}

Tensor take_rows(const Tensor& x, const std::vector<int>& indices) {
    require_ndim(x, 2, "take_rows");
    const int r = x.dim(0), c = x.dim(1);
    for (int idx : indices) {
        if (idx < 0 || idx >= r)
            throw ContractError("take_rows: index " + std::to_string(idx) + " out of " + shape_str(x.shape()));
    }
    const int nr = static_cast<int>(indices.size());
    if (nr == 0) throw ShapeError("take_rows: empty index list");
    std::vector<double> out(static_cast<std::size_t>(nr) * c);
    for (int t = 0; t < nr; ++t)
        std::copy_n(x.data().data() + static_cast<std::size_t>(indices[t]) * c, c,
                    out.data() + static_cast<std::size_t>(t) * c);
    auto bw = [indices, c](const std::vector<double>& g, const std::vector<Tensor>& ps) {
        const Tensor& x_ = ps[0];
        if (!x_.requires_grad()) return;
        x_.impl()->ensure_grad();
        for (std::size_t t = 0; t < indices.size(); ++t)
            for (int j = 0; j < c; ++j)
                x_.impl()->grad[static_cast<std::size_t>(indices[t]) * c + j] += g[t * c + j];
    };
    return make_op_result({nr, c}, std::move(out), {x}, std::move(bw), "take_rows");
}

Tensor pick(const Tensor& x, const std::vector<int>& col_per_row) {
    require_ndim(x, 2, "pick");
    const int r = x.dim(0), c = x.dim(1);
    if (static_cast<int>(col_per_row.size()) != r) {
        throw ShapeError("pick: need one column per row, got " + std::to_string(col_per_row.size()) +
                         " for " + shape_str(x.shape()));
    }
    for (int col : col_per_row) {
        if (col < 0 || col >= c)
            throw ContractError("pick: column " + std::to_string(col) + " out of " + shape_str(x.shape()));
    }
    std::vector<double> out(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) out[i] = x.data()[static_cast<std::size_t>(i) * c + col_per_row[i]];
    auto bw = [col_per_row, c](const std::vector<double>& g, const std::vector<Tensor>& ps) {
        const Tensor& x_ = ps[0];
        if (!x_.requires_grad()) return;
        x_.impl()->ensure_grad();
        for (std::size_t i = 0; i < col_per_row.size(); ++i)
            x_.impl()->grad[i * c + col_per_row[i]] += g[i];
    };
    return make_op_result({r, 1}, std::move(out), {x}, std::move(bw), "pick");
}

Tensor transpose(const Tensor& x) {
    require_ndim(x, 2, "transpose");
    const int r = x.dim(0), c = x.dim(1);
    std::vector<double> out(x.numel());
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(j) * r + i] = x.data()[static_cast<std::size_t>(i) * c + j];
    auto bw = [r, c](const std::vector<double>& g, const std::vector<Tensor>& ps) {
        const Tensor& x_ = ps[0];
        if (!x_.requires_grad()) return;
        x_.impl()->ensure_grad();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                x_.impl()->grad[static_cast<std::size_t>(i) * c + j] += g[static_cast<std::size_t>(j) * r + i];
    };
    return make_op_result({c, r}, std::move(out), {x}, std::move(bw), "transpose");
}

Tensor reshape(const Tensor& x, Shape shape) {
    require_valid_shape(shape, "reshape");
    if (shape_numel(shape) != x.numel()) {
        throw ShapeError("reshape: element count mismatch: " + shape_str(x.shape()) + " vs " + shape_str(shape));
    }
    std::vector<double> out = x.data();
    auto bw = [](const std::vector<double>& g, const std::vector<Tensor>& ps) {
        const Tensor& x_ = ps[0];
        if (x_.requires_grad()) x_.impl()->accumulate_grad(g);
    };
    return make_op_result(std::move(shape), std::move(out), {x}, std::move(bw), "reshape");
}

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    auto bw = [](const std::vector<double>& g, const std::vector<Tensor>& ps) {
        const Tensor& x_ = ps[0];
        if (!x_.requires_grad()) return;
        x_.impl()->ensure_grad();
        for (double& dv : x_.impl()->grad) dv += g[0];
    };
    return make_op_result({1}, {s}, {x}, std::move(bw), "sum_all");
}

Tensor mean_all(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    const double inv_n = 1.0 / static_cast<double>(x.numel());
    auto bw = [inv_n](const std::vector<double>& g, const std::vector<Tensor>& ps) {
        const Tensor& x_ = ps[0];
        if (!x_.requires_grad()) return;
        x_.impl()->ensure_grad();
        for (double& dv : x_.impl()->grad) dv += g[0] * inv_n;
    };
    return make_op_result({1}, {s * inv_n}, {x}, std::move(bw), "mean_all");
}

Tensor custom_unary(const Tensor& x, std::function<double(double)> f, std::function<double(double)> dfdx,
                    const char* name) {
    const std::size_t n = x.numel();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = f(x.data()[i]);
    auto bw = [dfdx, n](const std::vector<double>& g, const std::vector<Tensor>& ps) {
        const Tensor& x_ = ps[0];
        if (!x_.requires_grad()) return;
        x_.impl()->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) x_.impl()->grad[i] += dfdx(x_.data()[i]) * g[i];
    };
    return make_op_result(x.shape(), std::move(out), {x}, std::move(bw), name);
}

// --- ParameterStore ----------------------------------------------------------

void ParameterStore::insert(const std::string& name, const Tensor& t) {
    if (index_.count(name)) throw ConfigError("parameter registered twice: " + name);
    index_[name] = ordered_.size();
    ordered_.emplace_back(name, t);
}

Tensor ParameterStore::create(const std::string& name, Shape shape, std::vector<double> init) {
    Tensor t = Tensor::from_data(std::move(shape), std::move(init), true);
    insert(name, t);
    return t;
}

Tensor ParameterStore::create_uniform(const std::string& name, Shape shape, double lo, double hi, Rng& rng) {
    std::vector<double> d(shape_numel(shape));
    for (double& v : d) v = rng.uniform(lo, hi);
    return create(name, std::move(shape), std::move(d));
}

Tensor ParameterStore::create_normal(const std::string& name, Shape shape, double mean, double stddev, Rng& rng) {
    std::vector<double> d(shape_numel(shape));
    for (double& v : d) v = rng.normal(mean, stddev);
    return create(name, std::move(shape), std::move(d));
}

Tensor ParameterStore::create_zeros(const std::string& name, Shape shape) {
    return create(name, shape, std::vector<double>(shape_numel(shape), 0.0));
}

Tensor ParameterStore::create_full(const std::string& name, Shape shape, double value) {
    return create(name, shape, std::vector<double>(shape_numel(shape), value));
}

bool ParameterStore::contains(const std::string& name) const { return index_.count(name) != 0; }

Tensor ParameterStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return ordered_[it->second].second;
}

std::size_t ParameterStore::total_scalars() const {
    std::size_t n = 0;
    for (const auto& [name, t] : ordered_) n += t.numel();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& [name, t] : ordered_) t.zero_grad();
}

double fan_in_bound(int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace partsum
