#include "memdep/tensor/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace memdep::tensor {

namespace {

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, bool requires_grad)
    : shape_(std::move(shape)),
      data_(std::make_shared<std::vector<double>>(static_cast<size_t>(shape_numel(shape_)), 0.0)),
      requires_grad_(requires_grad) {}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return Tensor(std::move(shape), requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::fill(t.data_->begin(), t.data_->end(), value);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
  Tensor t;
  t.shape_ = std::move(shape);
  if (shape_numel(t.shape_) != static_cast<int64_t>(values.size()))
    throw ShapeError("value count does not match shape");
  t.data_ = std::make_shared<std::vector<double>>(std::move(values));
  t.requires_grad_ = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

int64_t Tensor::numel() const { return static_cast<int64_t>(data_->size()); }

int Tensor::rows() const {
  if (ndim() != 2) throw ShapeError("rows() on non-2D tensor " + shape_str());
  return shape_[0];
}

int Tensor::cols() const {
  if (ndim() != 2) throw ShapeError("cols() on non-2D tensor " + shape_str());
  return shape_[1];
}

double& Tensor::at2(int r, int c) {
  return (*data_)[static_cast<size_t>(r) * static_cast<size_t>(cols()) + static_cast<size_t>(c)];
}

double Tensor::at2(int r, int c) const {
  return (*data_)[static_cast<size_t>(r) * static_cast<size_t>(cols()) + static_cast<size_t>(c)];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor " + shape_str());
  return (*data_)[0];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ",";
    os << shape_[i];
  }
  os << ")";
  return os.str();
}

// ---- tape ------------------------------------------------------------------

std::vector<double>& Tape::grad(const Tensor& t) {
  auto it = grads_.find(t.key());
  if (it == grads_.end())
    it = grads_.emplace(t.key(), std::vector<double>(static_cast<size_t>(t.numel()), 0.0)).first;
  return it->second;
}

const std::vector<double>* Tape::maybe_grad(const Tensor& t) const {
  auto it = grads_.find(t.key());
  return it == grads_.end() ? nullptr : &it->second;
}

void Tape::record(std::function<void()> backward) {
  if (enabled_) nodes_.push_back(std::move(backward));
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) throw ShapeError("backward on non-scalar loss " + loss.shape_str());
  grad(loss)[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

void Tape::clear() {
  nodes_.clear();
  grads_.clear();
}

// ---- parameter registry ----------------------------------------------------

Tensor& ParamStore::create(const std::string& name, std::vector<int> shape) {
  if (by_name_.count(name)) throw std::runtime_error("duplicate parameter: " + name);
  order_.push_back(name);
  auto [it, ok] = by_name_.emplace(name, Tensor(std::move(shape), true));
  (void)ok;
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::runtime_error("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::runtime_error("unknown parameter: " + name);
  return it->second;
}

bool ParamStore::has(const std::string& name) const { return by_name_.count(name) != 0; }

int64_t ParamStore::total_elements() const {
  int64_t n = 0;
  for (const auto& name : order_) n += by_name_.at(name).numel();
  return n;
}

void ParamStore::init_normal(const std::string& name, Rng& rng, double std) {
  Tensor& t = get(name);
  for (int64_t i = 0; i < t.numel(); ++i) t.at(i) = rng.normal() * std;
}

}  // namespace memdep::tensor
