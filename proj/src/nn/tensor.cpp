#include "splice/nn.hpp"

namespace splice::nn {

template struct TensorT<float>;
template struct TensorT<double>;

} // namespace splice::nn
