#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace gqe::ad {

struct Node {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::vector<double> grad;  // sized lazily, same length as values
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    std::size_t size() const { return values.size(); }
    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }
};

/// Dense real tensor with reverse-mode autodiff. Value semantics over a
/// shared graph node; the define-by-run graph is freed after backward().
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double value,
                       bool requires_grad = false);
    static Tensor from_values(std::vector<std::size_t> shape, std::vector<double> values,
                              bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return node_->shape; }
    std::size_t size() const { return node_->size(); }
    std::size_t rows() const { return node_->shape.at(0); }
    std::size_t cols() const { return node_->shape.size() > 1 ? node_->shape[1] : 1; }

    std::vector<double>& values() { return node_->values; }
    const std::vector<double>& values() const { return node_->values; }
    std::vector<double>& grad();
    bool requires_grad() const { return node_->requires_grad; }
    double item() const;

    Tensor detach() const;
    void zero_grad();

    std::shared_ptr<Node>& node() { return node_; }
    const std::shared_ptr<Node>& node() const { return node_; }

  private:
    std::shared_ptr<Node> node_;
};

bool grad_enabled();

/// RAII switch disabling graph construction (inference/sampling paths).
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    bool previous;
};

// ---- core ops (forward value + registered backward closure) ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_rowwise(const Tensor& m, const Tensor& v);  // v broadcast across rows
Tensor mul_rowwise(const Tensor& m, const Tensor& v);
Tensor mul_colwise(const Tensor& m, const Tensor& v);  // v[i] scales row i
Tensor transpose(const Tensor& a);
Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1);
Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor stack_rows(const std::vector<Tensor>& rows);  // 1-D tensors -> [M, n]
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
Tensor log_values(const Tensor& a);
Tensor exp_values(const Tensor& a);
Tensor tanh_values(const Tensor& a);
Tensor sin_values(const Tensor& a);
Tensor cos_values(const Tensor& a);
Tensor gelu(const Tensor& a);  // tanh approximation
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);
Tensor causal_mask_fill(const Tensor& scores, double fill_value);
Tensor reduce_mean_all(const Tensor& a);
Tensor reduce_sum_all(const Tensor& a);
Tensor gather_cols(const Tensor& m, const std::vector<int>& ids);  // [rows]
Tensor scalar_mul(const Tensor& a, double c);
Tensor scalar_add(const Tensor& a, double c);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor minimum(const Tensor& a, const Tensor& b);

/// Reverse sweep from a scalar loss; leaf gradients accumulate additively and
/// the traversed graph is freed.
void backward(const Tensor& loss);

// ---- parameters & checkpoints ----

struct Parameter {
    std::string name;
    Tensor tensor;
    bool decay = true;  // weight-decay eligibility
};

class ParameterSet {
  public:
    Tensor create(const std::string& name, std::vector<std::size_t> shape,
                  std::vector<double> values, bool decay);
    std::vector<Parameter>& all() { return params_; }
    const std::vector<Parameter>& all() const { return params_; }
    long total_count() const;
    void zero_grad();

    /// Binary manifest: name -> shape -> little-endian f64 buffer, bit-exact.
    void save(const std::string& path) const;
    void load(const std::string& path);  // names/shapes must match exactly

  private:
    std::vector<Parameter> params_;
};

}  // namespace gqe::ad
