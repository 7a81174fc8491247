#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "partsum/error.hpp"
#include "partsum/rng.hpp"

namespace partsum {

// Row-major extents, innermost last.
using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

namespace detail {
struct TensorImpl;
}

// Dense 64-bit float tensor with reverse-mode differentiation. A Tensor is a
// cheap shared handle; values are immutable once created (parameter updates
// go through mutable_data() between recorded graphs). Ops on tensors that
// require gradients record backward closures; backward() runs one reverse
// sweep over the recorded graph, visiting each node exactly once and
// accumulating into leaf grads.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int ndim() const;
    int dim(int i) const;
    std::size_t numel() const;
    // Product of all leading extents; cols() is the last extent.
    int rows() const;
    int cols() const;

    const std::vector<double>& data() const;
    std::vector<double>& mutable_data();
    double item() const;  // requires numel() == 1
    double at(std::size_t flat_index) const;

    bool requires_grad() const;
    // Gradient accumulated by backward(); zeros if never touched.
    const std::vector<double>& grad() const;
    void zero_grad();

    detail::TensorImpl* impl() const { return impl_.get(); }

  private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<detail::TensorImpl> impl_;

    friend Tensor make_op_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                                 std::function<void(const std::vector<double>&, const std::vector<Tensor>&)> backward,
                                 const char* op_name);
};

namespace detail {
struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // sized lazily to match data
    std::vector<Tensor> parents;
    // Receives the output grad and the parent handles; accumulates into parents.
    std::function<void(const std::vector<double>&, const std::vector<Tensor>&)> backward;
    const char* op_name = "leaf";

    void ensure_grad();
    void accumulate_grad(const std::vector<double>& g);
};
}  // namespace detail

// Reverse sweep from a scalar root. Grads of leaves accumulate across calls
// (for batched losses); call zero_grad on parameters between steps. Each
// recorded graph should be backward()ed at most once.
void backward(const Tensor& root);

// Boolean mask for attention rows; allow[r * cols + c] != 0 means key c is
// visible to query r.
struct BoolMask {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> allow;

    static BoolMask all_allowed(int rows, int cols);
    bool at(int r, int c) const { return allow[static_cast<std::size_t>(r) * cols + c] != 0; }
    void set(int r, int c, bool v) { allow[static_cast<std::size_t>(r) * cols + c] = v ? 1 : 0; }
};

// --- primitive ops (all gradient-recorded) --------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
// Broadcasts a [D] row over every row of x[...xD].
Tensor add_rowwise(const Tensor& x, const Tensor& row);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor log(const Tensor& x);
Tensor abs(const Tensor& x);
// Forward clamps to [0,1], gradient passes through unclamped (straight-through).
Tensor clamp01_straight_through(const Tensor& x);

// Softmax over the last axis, max-stabilized. The masked overload zeroes the
// weight of disallowed entries and renormalizes over the allowed ones; a row
// with no allowed entry is a contract error.
Tensor softmax_rows(const Tensor& x);
Tensor softmax_rows(const Tensor& x, const BoolMask& mask);
// Stable log(softmax) over the last axis.
Tensor log_softmax_rows(const Tensor& x);

// Per-vector normalization over the last axis (zero mean, unit variance up to
// epsilon) followed by the learned affine gain/bias of size [d].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, int start, int count);
Tensor concat_rows(const std::vector<Tensor>& parts);
// Gathers rows (repetition allowed); gradient scatter-adds.
Tensor take_rows(const Tensor& x, const std::vector<int>& indices);
// out[r, 0] = x[r, col_per_row[r]] for 2-D x.
Tensor pick(const Tensor& x, const std::vector<int>& col_per_row);
Tensor transpose(const Tensor& x);  // 2-D
Tensor reshape(const Tensor& x, Shape shape);
Tensor sum_all(const Tensor& x);   // -> scalar
Tensor mean_all(const Tensor& x);  // -> scalar

// Custom elementwise op from value and derivative callbacks; used by the
// verification harness to exercise the checker with known-broken gradients.
Tensor custom_unary(const Tensor& x, std::function<double(double)> f, std::function<double(double)> dfdx,
                    const char* name = "custom_unary");

// --- parameter registry ----------------------------------------------------

// Named leaf tensors in registration order; the "parameters" half of the
// recorded-graph contract. Iteration order is creation order, which makes
// optimizer sweeps and checkpoints deterministic.
class ParameterStore {
  public:
    Tensor create(const std::string& name, Shape shape, std::vector<double> init);
    Tensor create_uniform(const std::string& name, Shape shape, double lo, double hi, Rng& rng);
    Tensor create_normal(const std::string& name, Shape shape, double mean, double stddev, Rng& rng);
    Tensor create_zeros(const std::string& name, Shape shape);
    Tensor create_full(const std::string& name, Shape shape, double value);

    bool contains(const std::string& name) const;
    Tensor get(const std::string& name) const;
    std::size_t size() const { return ordered_.size(); }
    std::size_t total_scalars() const;
    const std::vector<std::pair<std::string, Tensor>>& entries() const { return ordered_; }

    void zero_grad();

  private:
    void insert(const std::string& name, const Tensor& t);
    std::vector<std::pair<std::string, Tensor>> ordered_;
    std::map<std::string, std::size_t> index_;
};

// Linear-layer weight init: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
double fan_in_bound(int fan_in);

}  // namespace partsum
