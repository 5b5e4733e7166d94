#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "memdep/util/rng.hpp"

namespace memdep::tensor {

// Dense row-major 64-bit-float tensor. Copies share the underlying buffer;
// gradients live in a Tape, keyed by the buffer address, so one parameter set
// can be read by many tapes in parallel.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<int> shape, bool requires_grad = false);

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const;
  int rows() const;  // 2-D only
  int cols() const;

  double* data() { return data_->data(); }
  const double* data() const { return data_->data(); }
  double& at(int64_t i) { return (*data_)[static_cast<size_t>(i)]; }
  double at(int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }
  double& at2(int r, int c);
  double at2(int r, int c) const;
  double item() const;  // numel-1 tensors

  bool defined() const { return data_ != nullptr; }
  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool v) { requires_grad_ = v; }

  // Identity of the storage, used as the gradient key.
  const double* key() const { return data_->data(); }

  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::shared_ptr<std::vector<double>> data_;
  bool requires_grad_ = false;
};

// Records the backward pass of every op applied through it. Single-owner;
// independent tapes may run concurrently over shared read-only tensors.
class Tape {
 public:
  bool enabled() const { return enabled_; }
  void set_enabled(bool v) { enabled_ = v; }

  std::vector<double>& grad(const Tensor& t);
  const std::vector<double>* maybe_grad(const Tensor& t) const;
  void record(std::function<void()> backward);

  // Seeds d(loss)/d(loss)=1 and walks the tape once in reverse.
  void backward(const Tensor& loss);

  void clear();
  size_t node_count() const { return nodes_.size(); }

 private:
  bool enabled_ = true;
  std::vector<std::function<void()>> nodes_;
  std::unordered_map<const double*, std::vector<double>> grads_;
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- ops (forward value + recorded backward) -------------------------------

Tensor matmul(Tape& tp, const Tensor& a, const Tensor& b);
Tensor add(Tape& tp, const Tensor& a, const Tensor& b);  // same shape, or b one row
Tensor sub(Tape& tp, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tp, const Tensor& a, const Tensor& b);  // elementwise
Tensor emax(Tape& tp, const Tensor& a, const Tensor& b); // elementwise max, ties favor a
Tensor scale(Tape& tp, const Tensor& a, double s);
Tensor add_scalar(Tape& tp, const Tensor& a, double s);
Tensor transpose(Tape& tp, const Tensor& a);
Tensor reshape(Tape& tp, const Tensor& a, std::vector<int> shape);
Tensor concat_rows(Tape& tp, const std::vector<Tensor>& parts);
Tensor concat_cols(Tape& tp, const std::vector<Tensor>& parts);
Tensor slice_rows(Tape& tp, const Tensor& a, int r0, int r1);
Tensor slice_cols(Tape& tp, const Tensor& a, int c0, int c1);
Tensor gather_rows(Tape& tp, const Tensor& a, const std::vector<int>& rows);
Tensor relu(Tape& tp, const Tensor& a);
Tensor sigmoid(Tape& tp, const Tensor& a);
Tensor abs_val(Tape& tp, const Tensor& a);
Tensor softmax_rows(Tape& tp, const Tensor& a);
Tensor max_over_rows(Tape& tp, const Tensor& a);   // [m,n] -> [1,n]
Tensor mean_rows(Tape& tp, const Tensor& a);       // [m,n] -> [1,n]
Tensor sum_all(Tape& tp, const Tensor& a);         // -> [1]
Tensor layer_norm(Tape& tp, const Tensor& a, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
// Summed negative log-likelihood of target columns under row-softmax.
Tensor cross_entropy_rows(Tape& tp, const Tensor& logits, const std::vector<int>& targets);
// Summed stable binary cross-entropy on raw logits [m] or [m,1].
Tensor bce_with_logits(Tape& tp, const Tensor& logits, const std::vector<double>& targets);

// ---- optimizer -------------------------------------------------------------

class Adam {
 public:
  Adam(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  // Applies one update to `param` from `grad`; state is kept per parameter
  // buffer. `step_count` must be advanced once per optimization step via tick().
  void tick() { ++t_; }
  void update(Tensor& param, const std::vector<double>& grad);

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  struct State {
    std::vector<double> m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::unordered_map<const double*, State> state_;
};

// ---- parameter registry ----------------------------------------------------

class ParamStore {
 public:
  Tensor& create(const std::string& name, std::vector<int> shape);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;

  const std::vector<std::string>& names() const { return order_; }
  int64_t total_elements() const;

  // Gaussian(0, std) fill, seeded; biases and norm parameters are set by the
  // model after creation.
  void init_normal(const std::string& name, Rng& rng, double std);

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> by_name_;
};

// ---- checkpoints -----------------------------------------------------------

// <base>.manifest: "name dim0xdim1" lines in creation order.
// <base>.bin: all values as little-endian 32-bit floats in manifest order.
void save_checkpoint(const std::string& base, const ParamStore& params);
void load_checkpoint(const std::string& base, ParamStore& params);

}  // namespace memdep::tensor
