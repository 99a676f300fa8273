#include "mnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "mnet/error.hpp"

namespace mnet {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {
void check_shape(const Shape& shape) {
  MNET_REQUIRE(!shape.empty(), "tensor shape must have at least one axis");
  for (std::size_t d : shape) MNET_REQUIRE(d > 0, "tensor extents must be positive: " + shape_str(shape));
}
}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(values.begin(), values.end()) {
  check_shape(shape_);
  MNET_REQUIRE(data_.size() == shape_numel(shape_),
               "data length " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.data_) v = dist(rng);
  return t;
}

double Tensor::item() const {
  MNET_REQUIRE(data_.size() == 1, "item() needs a single-element tensor");
  return data_[0];
}

std::span<double> Tensor::ensure_grad() {
  if (grad_.empty()) grad_.assign(data_.size(), 0.0);
  return grad_;
}

void Tensor::zero_grad() {
  if (!grad_.empty()) std::fill(grad_.begin(), grad_.end(), 0.0);
}

Tensor Tensor::reshaped(Shape shape) const {
  MNET_REQUIRE(shape_numel(shape) == data_.size(),
               "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  Tensor out = *this;
  out.shape_ = std::move(shape);
  out.grad_.clear();
  out.requires_grad_ = false;
  return out;
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  MNET_REQUIRE(begin < end && end <= shape_.at(0), "row slice out of range");
  const std::size_t row = data_.size() / shape_[0];
  Shape s = shape_;
  s[0] = end - begin;
  Tensor out(std::move(s));
  std::copy(data_.begin() + begin * row, data_.begin() + end * row, out.data_.begin());
  return out;
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor gather_rows(const Tensor& src, std::span<const std::size_t> rows) {
  MNET_REQUIRE(!rows.empty(), "gather_rows needs at least one row");
  const std::size_t row = src.size() / src.dim(0);
  Shape s = src.shape();
  s[0] = rows.size();
  Tensor out(std::move(s));
  auto dst = out.data();
  auto in = src.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    MNET_REQUIRE(rows[i] < src.dim(0), "gather_rows index out of range");
    std::memcpy(dst.data() + i * row, in.data() + rows[i] * row, row * sizeof(double));
  }
  return out;
}

}  // namespace mnet
