#include <cmath>
#include <stdexcept>

#include "memdep/tensor/tensor.hpp"

namespace memdep::tensor {

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::update(Tensor& param, const std::vector<double>& grad) {
  if (static_cast<int64_t>(grad.size()) != param.numel())
    throw ShapeError("adam: gradient size mismatch");
  if (t_ < 1) throw std::logic_error("adam: tick() must precede update()");
  auto& st = state_[param.key()];
  if (st.m.empty()) {
    st.m.assign(grad.size(), 0.0);
    st.v.assign(grad.size(), 0.0);
  }
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < grad.size(); ++i) {
    st.m[i] = beta1_ * st.m[i] + (1.0 - beta1_) * grad[i];
    st.v[i] = beta2_ * st.v[i] + (1.0 - beta2_) * grad[i] * grad[i];
    double mhat = st.m[i] / bc1;
    double vhat = st.v[i] / bc2;
    param.at(static_cast<int64_t>(i)) -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

}  // namespace memdep::tensor
