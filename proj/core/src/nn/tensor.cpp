#include "metabug/nn/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace metabug::nn {

namespace {
std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape_, double fill)
    : shape(std::move(shape_)), data(product(shape), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  if (data.size() != product(shape))
    throw std::invalid_argument("tensor data length does not match shape " + shape_string(shape));
}

Tensor Tensor::vector(std::vector<double> v) {
  std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void check_finite(const Tensor& t, const char* where) {
  for (double x : t.data)
    if (!std::isfinite(x)) throw NonFinite(std::string("non-finite value produced by ") + where);
}

}  // namespace metabug::nn
