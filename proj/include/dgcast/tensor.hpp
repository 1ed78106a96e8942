#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dgcast {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until a gradient is accumulated
    bool requires_grad = false;
    bool is_leaf = true;
    bool consumed = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    // Propagates this node's grad into its parents' grads.
    std::function<void(Node&)> backward_fn;

    std::vector<double>& ensure_grad();
};

} // namespace detail

// Dense row-major array of doubles with optional reverse-mode gradient tracking.
//
// A Tensor is a cheap handle; copies share the underlying node. Results of
// primitives are immutable. Only leaves that own trainable state are mutated
// in place, and only by the optimizer or explicit mutable_data() access.
class Tensor {
public:
    Tensor();

    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor vector(std::vector<double> data, bool requires_grad = false);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                         bool requires_grad = false);

    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;
    std::size_t rows() const;  // 2-D only
    std::size_t cols() const;  // last-axis extent
    bool is_scalar() const { return numel() == 1 && rank() == 0; }

    std::span<const double> data() const;
    std::span<double> mutable_data();
    std::vector<double> to_vector() const;
    double item() const;
    double at(std::size_t i) const;
    double at(std::size_t r, std::size_t c) const;

    bool requires_grad() const;
    // Turns this tensor into a trainable leaf with a zero-initialized grad buffer.
    Tensor& set_requires_grad(bool on = true);
    bool is_leaf() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    // Reverse-mode sweep from this scalar. Frees saved activations afterwards.
    void backward() const;

    // Same values, no graph history.
    Tensor detach() const;
    Tensor clone() const;
    const char* op_name() const;
    bool same_node(const Tensor& other) const { return node_ == other.node_; }

    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

// Disables graph construction on the current thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_mode_enabled();

// ---- primitives -----------------------------------------------------------
// Elementwise binary ops accept equal shapes, or a rank-0 scalar on either side.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, double b);
Tensor mul(const Tensor& a, double b);
Tensor sub(double a, const Tensor& b);  // a - b
Tensor neg(const Tensor& a);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// (n,k)x(k,m) -> (n,m); a 1-D left operand of length k is treated as (1,k) and yields (m).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Concatenate / slice along the last axis. All leading extents must agree.
Tensor concat(const std::vector<Tensor>& parts);
Tensor concat(const Tensor& a, const Tensor& b);
Tensor slice(const Tensor& a, std::size_t begin, std::size_t end);

Tensor reshape(const Tensor& a, Shape shape);

// (n,m) + (m): adds the vector to every row. The only non-scalar broadcast.
Tensor add_row(const Tensor& matrix, const Tensor& row);

// Rows of an (n,d) matrix -> (n,n) matrix of Euclidean distances between rows.
// The gradient at a zero distance is taken as zero.
Tensor pairwise_l2(const Tensor& rows);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, b); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, b); }
inline Tensor operator*(double a, const Tensor& b) { return mul(b, a); }
inline Tensor operator-(double a, const Tensor& b) { return sub(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

} // namespace dgcast
