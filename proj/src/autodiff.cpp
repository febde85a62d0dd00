#include "gqe/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

namespace gqe::ad {

namespace {

thread_local bool g_grad_enabled = true;

std::string shape_text(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_text(a.shape()) + " vs " + shape_text(b.shape()));
}

std::shared_ptr<Node> make_node(std::vector<std::size_t> shape, std::size_t n) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->values.resize(n);
    return node;
}

// Registers the backward closure when gradients are both enabled and needed.
Tensor finish(std::shared_ptr<Node> node, std::vector<std::shared_ptr<Node>> parents,
              std::function<void(Node&)> fn) {
    bool needs = false;
    if (g_grad_enabled)
        for (const auto& p : parents)
            if (p->requires_grad) needs = true;
    if (needs) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward_fn = std::move(fn);
    }
    return Tensor(std::move(node));
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous; }

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    auto node = make_node(std::move(shape), n);
    std::fill(node->values.begin(), node->values.end(), 0.0);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
    auto t = zeros(std::move(shape), requires_grad);
    std::fill(t.values().begin(), t.values().end(), value);
    return t;
}

Tensor Tensor::from_values(std::vector<std::size_t> shape, std::vector<double> values,
                           bool requires_grad) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    if (n != values.size())
        throw std::invalid_argument("from_values: size does not match shape");
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_values({1}, {value}, requires_grad);
}

std::vector<double>& Tensor::grad() {
    node_->ensure_grad();
    return node_->grad;
}

double Tensor::item() const {
    if (node_->values.size() != 1) throw std::invalid_argument("item: tensor is not scalar");
    return node_->values[0];
}

Tensor Tensor::detach() const {
    auto node = std::make_shared<Node>();
    node->shape = node_->shape;
    node->values = node_->values;
    node->requires_grad = false;
    return Tensor(std::move(node));
}

void Tensor::zero_grad() {
    if (node_) node_->grad.assign(node_->values.size(), 0.0);
}

// --------------------------------- ops -------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows())
        shape_error("matmul", a, b);
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    auto node = make_node({m, n}, m * n);
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* pc = node->values.data();
    std::fill(pc, pc + m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = pa[i * k + kk];
            if (av == 0.0) continue;
            const double* brow = pb + kk * n;
            double* crow = pc + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    auto an = a.node(), bn = b.node();
    return finish(node, {an, bn}, [an, bn, m, k, n](Node& self) {
        const double* g = self.grad.data();
        if (an->requires_grad) {
            an->ensure_grad();
            double* ga = an->grad.data();
            const double* pbv = bn->values.data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double gv = g[i * n + j];
                    if (gv == 0.0) continue;
                    const double* brow = pbv + j;  // column j
                    for (std::size_t kk = 0; kk < k; ++kk)
                        ga[i * k + kk] += gv * brow[kk * n];
                }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            double* gb = bn->grad.data();
            const double* pav = an->values.data();
            for (std::size_t kk = 0; kk < k; ++kk)
                for (std::size_t i = 0; i < m; ++i) {
                    const double av = pav[i * k + kk];
                    if (av == 0.0) continue;
                    const double* grow = g + i * n;
                    double* gbrow = gb + kk * n;
                    for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                }
        }
    });
}

namespace {

template <class Fwd, class Bwd>
Tensor elementwise_binary(const char* name, const Tensor& a, const Tensor& b, Fwd fwd,
                          Bwd bwd) {
    if (a.shape() != b.shape()) shape_error(name, a, b);
    auto node = make_node(a.shape(), a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        node->values[i] = fwd(a.values()[i], b.values()[i]);
    auto an = a.node(), bn = b.node();
    return finish(node, {an, bn}, [an, bn, bwd](Node& self) {
        if (an->requires_grad) an->ensure_grad();
        if (bn->requires_grad) bn->ensure_grad();
        for (std::size_t i = 0; i < self.values.size(); ++i) {
            auto [da, db] = bwd(an->values[i], bn->values[i], self.values[i]);
            if (an->requires_grad) an->grad[i] += self.grad[i] * da;
            if (bn->requires_grad) bn->grad[i] += self.grad[i] * db;
        }
    });
}

template <class Fwd, class Bwd>
Tensor elementwise_unary(const Tensor& a, Fwd fwd, Bwd bwd) {
    auto node = make_node(a.shape(), a.size());
    for (std::size_t i = 0; i < a.size(); ++i) node->values[i] = fwd(a.values()[i]);
    auto an = a.node();
    return finish(node, {an}, [an, bwd](Node& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.values.size(); ++i)
            an->grad[i] += self.grad[i] * bwd(an->values[i], self.values[i]);
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double, double) { return std::pair{1.0, 1.0}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double, double) { return std::pair{1.0, -1.0}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double x, double y, double) { return std::pair{y, x}; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        "minimum", a, b, [](double x, double y) { return std::min(x, y); },
        [](double x, double y, double) {
            return x <= y ? std::pair{1.0, 0.0} : std::pair{0.0, 1.0};
        });
}

Tensor add_rowwise(const Tensor& m, const Tensor& v) {
    if (v.size() != m.cols()) shape_error("add_rowwise", m, v);
    auto node = make_node(m.shape(), m.size());
    const std::size_t r = m.rows(), c = m.cols();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            node->values[i * c + j] = m.values()[i * c + j] + v.values()[j];
    auto mn = m.node(), vn = v.node();
    return finish(node, {mn, vn}, [mn, vn, r, c](Node& self) {
        if (mn->requires_grad) {
            mn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) mn->grad[i] += self.grad[i];
        }
        if (vn->requires_grad) {
            vn->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) vn->grad[j] += self.grad[i * c + j];
        }
    });
}

Tensor mul_rowwise(const Tensor& m, const Tensor& v) {
    if (v.size() != m.cols()) shape_error("mul_rowwise", m, v);
    auto node = make_node(m.shape(), m.size());
    const std::size_t r = m.rows(), c = m.cols();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            node->values[i * c + j] = m.values()[i * c + j] * v.values()[j];
    auto mn = m.node(), vn = v.node();
    return finish(node, {mn, vn}, [mn, vn, r, c](Node& self) {
        if (mn->requires_grad) {
            mn->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j)
                    mn->grad[i * c + j] += self.grad[i * c + j] * vn->values[j];
        }
        if (vn->requires_grad) {
            vn->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j)
                    vn->grad[j] += self.grad[i * c + j] * mn->values[i * c + j];
        }
    });
}

Tensor mul_colwise(const Tensor& m, const Tensor& v) {
    if (v.size() != m.rows()) shape_error("mul_colwise", m, v);
    auto node = make_node(m.shape(), m.size());
    const std::size_t r = m.rows(), c = m.cols();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            node->values[i * c + j] = m.values()[i * c + j] * v.values()[i];
    auto mn = m.node(), vn = v.node();
    return finish(node, {mn, vn}, [mn, vn, r, c](Node& self) {
        if (mn->requires_grad) {
            mn->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j)
                    mn->grad[i * c + j] += self.grad[i * c + j] * vn->values[i];
        }
        if (vn->requires_grad) {
            vn->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j)
                    vn->grad[i] += self.grad[i * c + j] * mn->values[i * c + j];
        }
    });
}

Tensor transpose(const Tensor& a) {
    if (a.shape().size() != 2) throw std::invalid_argument("transpose: rank-2 only");
    const std::size_t r = a.rows(), c = a.cols();
    auto node = make_node({c, r}, a.size());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) node->values[j * r + i] = a.values()[i * c + j];
    auto an = a.node();
    return finish(node, {an}, [an, r, c](Node& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) an->grad[i * c + j] += self.grad[j * r + i];
    });
}

Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
    if (a.shape().size() != 2 || c1 > a.cols() || c0 >= c1)
        throw std::invalid_argument("slice_cols: bad column range");
    const std::size_t r = a.rows(), c = a.cols(), w = c1 - c0;
    auto node = make_node({r, w}, r * w);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < w; ++j)
            node->values[i * w + j] = a.values()[i * c + c0 + j];
    auto an = a.node();
    return finish(node, {an}, [an, r, c, c0, w](Node& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j)
                an->grad[i * c + c0 + j] += self.grad[i * w + j];
    });
}

Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1) {
    if (a.shape().size() != 2 || r1 > a.rows() || r0 >= r1)
        throw std::invalid_argument("slice_rows: bad row range");
    const std::size_t c = a.cols(), h = r1 - r0;
    auto node = make_node({h, c}, h * c);
    std::copy(a.values().begin() + r0 * c, a.values().begin() + r1 * c, node->values.begin());
    auto an = a.node();
    return finish(node, {an}, [an, r0, c, h](Node& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < h * c; ++i) an->grad[r0 * c + i] += self.grad[i];
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
    const std::size_t r = parts[0].rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.rows() != r) shape_error("concat_cols", parts[0], p);
        total += p.cols();
    }
    auto node = make_node({r, total}, r * total);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t c = p.cols();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
                node->values[i * total + offset + j] = p.values()[i * c + j];
        offset += c;
    }
    std::vector<std::shared_ptr<Node>> parents;
    for (const auto& p : parts) parents.push_back(p.node());
    return finish(node, parents, [parents, r, total](Node& self) {
        std::size_t off = 0;
        for (const auto& p : parents) {
            const std::size_t c = p->shape[1];
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                        p->grad[i * c + j] += self.grad[i * total + off + j];
            }
            off += c;
        }
    });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw std::invalid_argument("stack_rows: empty input");
    const std::size_t n = rows[0].size();
    auto node = make_node({rows.size(), n}, rows.size() * n);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != n) shape_error("stack_rows", rows[0], rows[i]);
        std::copy(rows[i].values().begin(), rows[i].values().end(),
                  node->values.begin() + i * n);
    }
    std::vector<std::shared_ptr<Node>> parents;
    for (const auto& rt : rows) parents.push_back(rt.node());
    return finish(node, parents, [parents, n](Node& self) {
        for (std::size_t i = 0; i < parents.size(); ++i) {
            if (!parents[i]->requires_grad) continue;
            parents[i]->ensure_grad();
            for (std::size_t j = 0; j < n; ++j)
                parents[i]->grad[j] += self.grad[i * n + j];
        }
    });
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
    if (table.shape().size() != 2) throw std::invalid_argument("embedding_lookup: rank-2 table");
    const std::size_t v = table.rows(), d = table.cols();
    auto node = make_node({ids.size(), d}, ids.size() * d);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v)
            throw std::invalid_argument("embedding_lookup: unknown token id " +
                                        std::to_string(ids[i]));
        std::copy(table.values().begin() + ids[i] * d,
                  table.values().begin() + (ids[i] + 1) * d, node->values.begin() + i * d);
    }
    auto tn = table.node();
    return finish(node, {tn}, [tn, ids, d](Node& self) {
        tn->ensure_grad();
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = 0; j < d; ++j)
                tn->grad[ids[i] * d + j] += self.grad[i * d + j];
    });
}

Tensor softmax_rows(const Tensor& a) {
    const std::size_t r = a.rows(), c = a.cols();
    auto node = make_node(a.shape(), a.size());
    for (std::size_t i = 0; i < r; ++i) {
        const double* x = a.values().data() + i * c;
        double* y = node->values.data() + i * c;
        double mx = x[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) sum += (y[j] = std::exp(x[j] - mx));
        for (std::size_t j = 0; j < c; ++j) y[j] /= sum;
    }
    auto an = a.node();
    return finish(node, {an}, [an, r, c](Node& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < r; ++i) {
            const double* y = self.values.data() + i * c;
            const double* g = self.grad.data() + i * c;
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += y[j] * g[j];
            for (std::size_t j = 0; j < c; ++j)
                an->grad[i * c + j] += y[j] * (g[j] - dot);
        }
    });
}

Tensor log_softmax_rows(const Tensor& a) {
    const std::size_t r = a.rows(), c = a.cols();
    auto node = make_node(a.shape(), a.size());
    for (std::size_t i = 0; i < r; ++i) {
        const double* x = a.values().data() + i * c;
        double* y = node->values.data() + i * c;
        double mx = x[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) sum += std::exp(x[j] - mx);
        const double lse = mx + std::log(sum);
        for (std::size_t j = 0; j < c; ++j) y[j] = x[j] - lse;
    }
    auto an = a.node();
    return finish(node, {an}, [an, r, c](Node& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < r; ++i) {
            const double* y = self.values.data() + i * c;
            const double* g = self.grad.data() + i * c;
            double gsum = 0.0;
            for (std::size_t j = 0; j < c; ++j) gsum += g[j];
            for (std::size_t j = 0; j < c; ++j)
                an->grad[i * c + j] += g[j] - std::exp(y[j]) * gsum;
        }
    });
}

Tensor log_values(const Tensor& a) {
    return elementwise_unary(
        a, [](double x) { return std::log(x); },
        [](double x, double) { return 1.0 / x; });
}

Tensor exp_values(const Tensor& a) {
    return elementwise_unary(
        a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor tanh_values(const Tensor& a) {
    return elementwise_unary(
        a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor sin_values(const Tensor& a) {
    return elementwise_unary(
        a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Tensor cos_values(const Tensor& a) {
    return elementwise_unary(
        a, [](double x) { return std::cos(x); },
        [](double x, double) { return -std::sin(x); });
}

Tensor gelu(const Tensor& a) {
    constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double kA = 0.044715;
    return elementwise_unary(
        a,
        [](double x) {
            return 0.5 * x * (1.0 + std::tanh(kC * (x + kA * x * x * x)));
        },
        [](double x, double) {
            const double u = kC * (x + kA * x * x * x);
            const double t = std::tanh(u);
            const double du = kC * (1.0 + 3.0 * kA * x * x);
            return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
        });
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const std::size_t r = x.rows(), c = x.cols();
    if (gain.size() != c || bias.size() != c) shape_error("layer_norm_rows", x, gain);
    auto node = make_node(x.shape(), x.size());
    std::vector<double> inv_std(r), mean(r);
    for (std::size_t i = 0; i < r; ++i) {
        const double* px = x.values().data() + i * c;
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += px[j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) var += (px[j] - mu) * (px[j] - mu);
        var /= static_cast<double>(c);
        const double is = 1.0 / std::sqrt(var + eps);
        mean[i] = mu;
        inv_std[i] = is;
        for (std::size_t j = 0; j < c; ++j)
            node->values[i * c + j] = (px[j] - mu) * is * gain.values()[j] + bias.values()[j];
    }
    auto xn = x.node(), gn = gain.node(), bn = bias.node();
    return finish(node, {xn, gn, bn}, [xn, gn, bn, r, c, mean, inv_std](Node& self) {
        for (std::size_t i = 0; i < r; ++i) {
            const double* g = self.grad.data() + i * c;
            const double* px = xn->values.data() + i * c;
            if (gn->requires_grad) {
                gn->ensure_grad();
                for (std::size_t j = 0; j < c; ++j)
                    gn->grad[j] += g[j] * (px[j] - mean[i]) * inv_std[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t j = 0; j < c; ++j) bn->grad[j] += g[j];
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                double s1 = 0.0, s2 = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    const double gy = g[j] * gn->values[j];
                    const double xh = (px[j] - mean[i]) * inv_std[i];
                    s1 += gy;
                    s2 += gy * xh;
                }
                s1 /= static_cast<double>(c);
                s2 /= static_cast<double>(c);
                for (std::size_t j = 0; j < c; ++j) {
                    const double gy = g[j] * gn->values[j];
                    const double xh = (px[j] - mean[i]) * inv_std[i];
                    xn->grad[i * c + j] += (gy - s1 - xh * s2) * inv_std[i];
                }
            }
        }
    });
}

Tensor causal_mask_fill(const Tensor& scores, double fill_value) {
    if (scores.shape().size() != 2 || scores.rows() != scores.cols())
        throw std::invalid_argument("causal_mask_fill: square matrix required");
    const std::size_t t = scores.rows();
    auto node = make_node(scores.shape(), scores.size());
    for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < t; ++j)
            node->values[i * t + j] = j > i ? fill_value : scores.values()[i * t + j];
    auto sn = scores.node();
    return finish(node, {sn}, [sn, t](Node& self) {
        sn->ensure_grad();
        for (std::size_t i = 0; i < t; ++i)
            for (std::size_t j = 0; j <= i; ++j) sn->grad[i * t + j] += self.grad[i * t + j];
    });
}

Tensor reduce_sum_all(const Tensor& a) {
    auto node = make_node({1}, 1);
    double s = 0.0;
    for (double v : a.values()) s += v;
    node->values[0] = s;
    auto an = a.node();
    return finish(node, {an}, [an](Node& self) {
        an->ensure_grad();
        for (auto& g : an->grad) g += self.grad[0];
    });
}

Tensor reduce_mean_all(const Tensor& a) {
    const double inv = 1.0 / static_cast<double>(a.size());
    auto node = make_node({1}, 1);
    double s = 0.0;
    for (double v : a.values()) s += v;
    node->values[0] = s * inv;
    auto an = a.node();
    return finish(node, {an}, [an, inv](Node& self) {
        an->ensure_grad();
        for (auto& g : an->grad) g += self.grad[0] * inv;
    });
}

Tensor gather_cols(const Tensor& m, const std::vector<int>& ids) {
    if (m.shape().size() != 2 || ids.size() != m.rows())
        throw std::invalid_argument("gather_cols: one index per row required");
    const std::size_t r = m.rows(), c = m.cols();
    auto node = make_node({r}, r);
    for (std::size_t i = 0; i < r; ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= c)
            throw std::invalid_argument("gather_cols: index out of range");
        node->values[i] = m.values()[i * c + ids[i]];
    }
    auto mn = m.node();
    return finish(node, {mn}, [mn, ids, c](Node& self) {
        mn->ensure_grad();
        for (std::size_t i = 0; i < ids.size(); ++i)
            mn->grad[i * c + ids[i]] += self.grad[i];
    });
}

Tensor scalar_mul(const Tensor& a, double cv) {
    return elementwise_unary(
        a, [cv](double x) { return x * cv; }, [cv](double, double) { return cv; });
}

Tensor scalar_add(const Tensor& a, double cv) {
    return elementwise_unary(
        a, [cv](double x) { return x + cv; }, [](double, double) { return 1.0; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    return elementwise_unary(
        a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
        [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

void backward(const Tensor& loss) {
    if (loss.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    if (!loss.node()->requires_grad) return;

    // Iterative post-order DFS for a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->backward_fn && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        node->ensure_grad();
        if (node->backward_fn) node->backward_fn(*node);
    }
    // Free the traversed graph; leaf gradients stay.
    for (Node* node : order) {
        node->backward_fn = nullptr;
        node->parents.clear();
    }
}

// ----------------------------- parameters ----------------------------------

Tensor ParameterSet::create(const std::string& name, std::vector<std::size_t> shape,
                            std::vector<double> values, bool decay) {
    for (const auto& p : params_)
        if (p.name == name) throw std::invalid_argument("duplicate parameter name: " + name);
    Tensor t = Tensor::from_values(std::move(shape), std::move(values), true);
    params_.push_back(Parameter{name, t, decay});
    return t;
}

long ParameterSet::total_count() const {
    long n = 0;
    for (const auto& p : params_) n += static_cast<long>(p.tensor.size());
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

namespace {
constexpr char kMagic[8] = {'G', 'Q', 'E', 'C', 'K', 'P', 'T', '1'};
}

void ParameterSet::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 8);
    std::uint64_t n = params_.size();
    out.write(reinterpret_cast<const char*>(&n), 8);
    for (const auto& p : params_) {
        std::uint32_t len = static_cast<std::uint32_t>(p.name.size());
        out.write(reinterpret_cast<const char*>(&len), 4);
        out.write(p.name.data(), len);
        std::uint8_t decay = p.decay ? 1 : 0;
        out.write(reinterpret_cast<const char*>(&decay), 1);
        std::uint32_t ndim = static_cast<std::uint32_t>(p.tensor.shape().size());
        out.write(reinterpret_cast<const char*>(&ndim), 4);
        for (std::size_t d : p.tensor.shape()) {
            std::uint64_t dim = d;
            out.write(reinterpret_cast<const char*>(&dim), 8);
        }
        out.write(reinterpret_cast<const char*>(p.tensor.values().data()),
                  static_cast<std::streamsize>(p.tensor.size() * sizeof(double)));
    }
}

void ParameterSet::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("bad checkpoint magic: " + path);
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    if (n != params_.size()) throw std::runtime_error("checkpoint parameter count mismatch");
    for (auto& p : params_) {
        std::uint32_t len = 0;
        in.read(reinterpret_cast<char*>(&len), 4);
        std::string name(len, '\0');
        in.read(name.data(), len);
        if (name != p.name) throw std::runtime_error("checkpoint name mismatch: " + name);
        std::uint8_t decay = 0;
        in.read(reinterpret_cast<char*>(&decay), 1);
        std::uint32_t ndim = 0;
        in.read(reinterpret_cast<char*>(&ndim), 4);
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) {
            std::uint64_t dim = 0;
            in.read(reinterpret_cast<char*>(&dim), 8);
            d = dim;
        }
        if (shape != p.tensor.shape())
            throw std::runtime_error("checkpoint shape mismatch for " + name);
        in.read(reinterpret_cast<char*>(p.tensor.values().data()),
                static_cast<std::streamsize>(p.tensor.size() * sizeof(double)));
    }
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
}

}  // namespace gqe::ad
