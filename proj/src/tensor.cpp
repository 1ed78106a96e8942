#include "dgcast/tensor.hpp"

#include "dgcast/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace dgcast {

namespace {

thread_local bool t_grad_enabled = true;

using NodePtr = std::shared_ptr<detail::Node>;

NodePtr new_node(Shape shape, std::vector<double> data) {
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    return node;
}

// Wires a freshly computed value into the graph when any input is tracked.
Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   std::vector<NodePtr> parents, std::function<void(detail::Node&)> backward_fn) {
    auto node = new_node(std::move(shape), std::move(data));
    node->op = op;
    node->is_leaf = false;
    if (t_grad_enabled) {
        for (const auto& p : parents) {
            if (p->consumed && !p->is_leaf) {
                throw GraphError(std::string(op) + ": input belongs to a graph already consumed by backward()");
            }
        }
        const bool tracked =
            std::any_of(parents.begin(), parents.end(), [](const NodePtr& p) { return p->requires_grad; });
        if (tracked) {
            node->requires_grad = true;
            node->parents = std::move(parents);
            node->backward_fn = std::move(backward_fn);
        }
    }
    return Tensor(std::move(node));
}

bool is_rank0(const Tensor& t) { return t.rank() == 0; }

void check_finite_domain(bool ok, const char* op, const std::string& what) {
    if (!ok) throw DomainError(std::string(op) + ": " + what);
}

enum class BinaryKind { same, scalar_left, scalar_right };

BinaryKind binary_kind(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return BinaryKind::same;
    if (is_rank0(a)) return BinaryKind::scalar_left;
    if (is_rank0(b)) return BinaryKind::scalar_right;
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Generic elementwise binary op. fwd(x, y) -> value; dfa/dfb(x, y, out) -> partials.
template <class Fwd, class DA, class DB>
Tensor binary_op(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, DA dfa, DB dfb) {
    const BinaryKind kind = binary_kind(op, a, b);
    const Shape out_shape = kind == BinaryKind::scalar_left ? b.shape() : a.shape();
    const std::size_t n = shape_numel(out_shape);
    auto ad = a.data();
    auto bd = b.data();
    auto ai = [kind](std::size_t i) { return kind == BinaryKind::scalar_left ? 0 : i; };
    auto bi = [kind](std::size_t i) { return kind == BinaryKind::scalar_right ? 0 : i; };
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ad[ai(i)], bd[bi(i)]);
    NodePtr an = a.node();
    NodePtr bn = b.node();
    return make_result(op, out_shape, std::move(out), {an, bn}, [an, bn, kind, n, dfa, dfb](detail::Node& self) {
        auto ia = [kind](std::size_t i) { return kind == BinaryKind::scalar_left ? 0 : i; };
        auto ib = [kind](std::size_t i) { return kind == BinaryKind::scalar_right ? 0 : i; };
        if (an->requires_grad) {
            auto& g = an->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                g[ia(i)] += self.grad[i] * dfa(an->data[ia(i)], bn->data[ib(i)], self.data[i]);
        }
        if (bn->requires_grad) {
            auto& g = bn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                g[ib(i)] += self.grad[i] * dfb(an->data[ia(i)], bn->data[ib(i)], self.data[i]);
        }
    });
}

// Elementwise unary op. df(x, out) -> derivative.
template <class Fwd, class DF>
Tensor unary_op(const char* op, const Tensor& a, Fwd fwd, DF df) {
    const std::size_t n = a.numel();
    auto ad = a.data();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ad[i]);
    NodePtr an = a.node();
    return make_result(op, a.shape(), std::move(out), {an}, [an, n, df](detail::Node& self) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * df(an->data[i], self.data[i]);
    });
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Splits a shape into (leading rows, last-axis extent).
std::pair<std::size_t, std::size_t> rows_cols(const Shape& s) {
    if (s.empty()) return {1, 1};
    const std::size_t last = s.back();
    return {last == 0 ? 0 : shape_numel(s) / last, last};
}

} // namespace

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

std::vector<double>& detail::Node::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
}

// ---- Tensor -----------------------------------------------------------------

Tensor::Tensor() : node_(new_node({}, {0.0})) {}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("Tensor::from: shape " + shape_str(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " + std::to_string(data.size()));
    }
    Tensor t(new_node(std::move(shape), std::move(data)));
    if (requires_grad) t.set_requires_grad(true);
    return t;
}

Tensor Tensor::vector(std::vector<double> data, bool requires_grad) {
    const std::size_t n = data.size();
    return from({n}, std::move(data), requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("Tensor::matrix: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return from({r, c}, std::move(data), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->data.size(); }

std::size_t Tensor::rows() const {
    if (rank() != 2) throw ShapeError("rows(): expected a 2-D tensor, got " + shape_str(shape()));
    return shape()[0];
}

std::size_t Tensor::cols() const { return rank() == 0 ? 1 : shape().back(); }

std::span<const double> Tensor::data() const { return node_->data; }

std::span<double> Tensor::mutable_data() {
    if (!node_->is_leaf) throw GraphError("mutable_data(): only leaf tensors may be modified in place");
    return node_->data;
}

std::vector<double> Tensor::to_vector() const { return node_->data; }

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item(): tensor has shape " + shape_str(shape()));
    return node_->data[0];
}

double Tensor::at(std::size_t i) const { return node_->data.at(i); }
double Tensor::at(std::size_t r, std::size_t c) const { return node_->data.at(r * cols() + c); }

bool Tensor::requires_grad() const { return node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
    if (!node_->is_leaf) throw GraphError("set_requires_grad(): only leaves can be marked trainable");
    node_->requires_grad = on;
    if (on) {
        node_->ensure_grad();
    } else {
        node_->grad.clear();
    }
    return *this;
}

bool Tensor::is_leaf() const { return node_->is_leaf; }
bool Tensor::has_grad() const { return node_->grad.size() == node_->data.size() && node_->requires_grad; }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }

void Tensor::zero_grad() {
    if (node_->requires_grad) node_->grad.assign(node_->data.size(), 0.0);
}

const char* Tensor::op_name() const { return node_->op; }

Tensor Tensor::detach() const { return Tensor(new_node(shape(), node_->data)); }
Tensor Tensor::clone() const { return detach(); }

void Tensor::backward() const {
    if (numel() != 1) throw GraphError("backward(): loss must be scalar, got shape " + shape_str(shape()));
    if (node_->consumed) throw GraphError("backward(): graph already consumed");
    if (!node_->requires_grad) {
        node_->consumed = !node_->is_leaf;
        return;
    }

    // Iterative post-order DFS gives a topological order of tracked nodes.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            detail::Node* p = n->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                if (p->consumed && !p->is_leaf) throw GraphError("backward(): graph already consumed");
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->is_leaf || !n->backward_fn) continue;
        n->ensure_grad();
        n->backward_fn(*n);
    }
    for (detail::Node* n : order) {
        if (n->is_leaf) continue;
        n->consumed = true;
        n->backward_fn = nullptr;
        n->parents.clear();
        n->grad.clear();
    }
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_mode_enabled() { return t_grad_enabled; }

// ---- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
        [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
        [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
        [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    for (double v : b.data()) check_finite_domain(v != 0.0, "div", "division by zero");
    return binary_op(
        "div", a, b, [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
        [](double, double y, double out) { return -out / y; });
}

Tensor add(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
Tensor mul(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
Tensor sub(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
Tensor neg(const Tensor& a) { return mul(a, -1.0); }

Tensor exp(const Tensor& a) {
    return unary_op(
        "exp", a, [](double x) { return std::exp(x); }, [](double, double out) { return out; });
}

Tensor log(const Tensor& a) {
    for (double v : a.data()) check_finite_domain(v > 0.0, "log", "nonpositive argument");
    return unary_op(
        "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor tanh(const Tensor& a) {
    return unary_op(
        "tanh", a, [](double x) { return std::tanh(x); }, [](double, double out) { return 1.0 - out * out; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        "sigmoid", a, stable_sigmoid, [](double, double out) { return out * (1.0 - out); });
}

Tensor softplus(const Tensor& a) {
    return unary_op(
        "softplus", a, stable_softplus, [](double x, double) { return stable_sigmoid(x); });
}

Tensor square(const Tensor& a) {
    return unary_op(
        "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
    for (double v : a.data()) check_finite_domain(v >= 0.0, "sqrt", "negative argument");
    return unary_op(
        "sqrt", a, [](double x) { return std::sqrt(x); }, [](double, double out) { return 0.5 / out; });
}

// ---- reductions -------------------------------------------------------------

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    NodePtr an = a.node();
    return make_result("sum", {}, {s}, {an}, [an](detail::Node& self) {
        auto& g = an->ensure_grad();
        for (double& v : g) v += self.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    const std::size_t n = a.numel();
    if (n == 0) throw ShapeError("mean: empty tensor");
    double s = 0.0;
    for (double v : a.data()) s += v;
    NodePtr an = a.node();
    return make_result("mean", {}, {s / static_cast<double>(n)}, {an}, [an, n](detail::Node& self) {
        auto& g = an->ensure_grad();
        const double d = self.grad[0] / static_cast<double>(n);
        for (double& v : g) v += d;
    });
}

// ---- linear algebra ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    const bool vec_left = a.rank() == 1;
    if ((a.rank() != 2 && !vec_left) || b.rank() != 2) {
        throw ShapeError("matmul: expected (n,k)x(k,m), got " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    const std::size_t n = vec_left ? 1 : a.shape()[0];
    const std::size_t k = a.shape().back();
    const std::size_t m = b.shape()[1];
    if (b.shape()[0] != k) {
        throw ShapeError("matmul: inner dimensions differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    std::vector<double> out(n * m, 0.0);
    const double* A = a.data().data();
    const double* B = b.data().data();
    for (std::size_t i = 0; i < n; ++i) {
        double* row = out.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = A[i * k + p];
            if (av == 0.0) continue;
            const double* brow = B + p * m;
            for (std::size_t j = 0; j < m; ++j) row[j] += av * brow[j];
        }
    }
    Shape shape = vec_left ? Shape{m} : Shape{n, m};
    NodePtr an = a.node();
    NodePtr bn = b.node();
    return make_result("matmul", shape, std::move(out), {an, bn}, [an, bn, n, k, m](detail::Node& self) {
        const double* G = self.grad.data();
        if (an->requires_grad) {
            auto& ga = an->ensure_grad();
            const double* B = bn->data.data();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    const double* brow = B + p * m;
                    const double* grow = G + i * m;
                    for (std::size_t j = 0; j < m; ++j) s += grow[j] * brow[j];
                    ga[i * k + p] += s;
                }
        }
        if (bn->requires_grad) {
            auto& gb = bn->ensure_grad();
            const double* A = an->data.data();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = A[i * k + p];
                    if (av == 0.0) continue;
                    double* gbrow = gb.data() + p * m;
                    const double* grow = G + i * m;
                    for (std::size_t j = 0; j < m; ++j) gbrow[j] += av * grow[j];
                }
        }
    });
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: expected 2-D, got " + shape_str(a.shape()));
    const std::size_t r = a.shape()[0];
    const std::size_t c = a.shape()[1];
    std::vector<double> out(r * c);
    auto ad = a.data();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = ad[i * c + j];
    NodePtr an = a.node();
    return make_result("transpose", {c, r}, std::move(out), {an}, [an, r, c](detail::Node& self) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
    });
}

// ---- structural -------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& first = parts.front().shape();
    if (first.empty()) throw ShapeError("concat: scalars cannot be concatenated");
    Shape lead(first.begin(), first.end() - 1);
    std::size_t total = 0;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != first.size() || !std::equal(lead.begin(), lead.end(), s.begin())) {
            throw ShapeError("concat: leading extents differ " + shape_str(first) + " vs " + shape_str(s));
        }
        widths.push_back(s.back());
        total += s.back();
    }
    const std::size_t nrows = shape_numel(lead);
    std::vector<double> out(nrows * total);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        auto d = parts[k].data();
        for (std::size_t r = 0; r < nrows; ++r)
            std::copy_n(d.begin() + r * widths[k], widths[k], out.begin() + r * total + offset);
        offset += widths[k];
    }
    Shape shape = lead;
    shape.push_back(total);
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    return make_result("concat", shape, std::move(out), nodes, [nodes, widths, nrows, total](detail::Node& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (nodes[k]->requires_grad) {
                auto& g = nodes[k]->ensure_grad();
                for (std::size_t r = 0; r < nrows; ++r)
                    for (std::size_t j = 0; j < widths[k]; ++j) g[r * widths[k] + j] += self.grad[r * total + off + j];
            }
            off += widths[k];
        }
    });
}

Tensor concat(const Tensor& a, const Tensor& b) { return concat(std::vector<Tensor>{a, b}); }

Tensor slice(const Tensor& a, std::size_t begin, std::size_t end) {
    if (a.rank() == 0) throw ShapeError("slice: scalar input");
    const auto [nrows, width] = rows_cols(a.shape());
    if (begin > end || end > width) {
        throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of bounds for shape " + shape_str(a.shape()));
    }
    const std::size_t w = end - begin;
    std::vector<double> out(nrows * w);
    auto d = a.data();
    for (std::size_t r = 0; r < nrows; ++r) std::copy_n(d.begin() + r * width + begin, w, out.begin() + r * w);
    Shape shape = a.shape();
    shape.back() = w;
    NodePtr an = a.node();
    return make_result("slice", shape, std::move(out), {an}, [an, nrows, width, begin, w](detail::Node& self) {
        auto& g = an->ensure_grad();
        for (std::size_t r = 0; r < nrows; ++r)
            for (std::size_t j = 0; j < w; ++j) g[r * width + begin + j] += self.grad[r * w + j];
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
    }
    NodePtr an = a.node();
    return make_result("reshape", std::move(shape), a.to_vector(), {an}, [an](detail::Node& self) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor add_row(const Tensor& matrix, const Tensor& row) {
    if (matrix.rank() != 2 || row.rank() != 1 || matrix.shape()[1] != row.shape()[0]) {
        throw ShapeError("add_row: expected (n,m) + (m), got " + shape_str(matrix.shape()) + " + " +
                         shape_str(row.shape()));
    }
    const std::size_t n = matrix.shape()[0];
    const std::size_t m = matrix.shape()[1];
    std::vector<double> out = matrix.to_vector();
    auto rd = row.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] += rd[j];
    NodePtr mn = matrix.node();
    NodePtr rn = row.node();
    return make_result("add_row", matrix.shape(), std::move(out), {mn, rn}, [mn, rn, n, m](detail::Node& self) {
        if (mn->requires_grad) {
            auto& g = mn->ensure_grad();
            for (std::size_t i = 0; i < n * m; ++i) g[i] += self.grad[i];
        }
        if (rn->requires_grad) {
            auto& g = rn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) g[j] += self.grad[i * m + j];
        }
    });
}

Tensor pairwise_l2(const Tensor& rows) {
    if (rows.rank() != 2) throw ShapeError("pairwise_l2: expected 2-D, got " + shape_str(rows.shape()));
    const std::size_t n = rows.shape()[0];
    const std::size_t d = rows.shape()[1];
    auto z = rows.data();
    std::vector<double> out(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = z[i * d + k] - z[j * d + k];
                s += diff * diff;
            }
            out[i * n + j] = out[j * n + i] = std::sqrt(s);
        }
    NodePtr zn = rows.node();
    return make_result("pairwise_l2", {n, n}, std::move(out), {zn}, [zn, n, d](detail::Node& self) {
        auto& g = zn->ensure_grad();
        const auto& zd = zn->data;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double dist = self.data[i * n + j];
                if (i == j || dist == 0.0) continue;
                const double coef = self.grad[i * n + j] / dist;
                for (std::size_t k = 0; k < d; ++k) {
                    const double diff = zd[i * d + k] - zd[j * d + k];
                    g[i * d + k] += coef * diff;
                    g[j * d + k] -= coef * diff;
                }
            }
    });
}

} // namespace dgcast
