#include "splice/nn.hpp"

namespace splice::nn {

template class Conv2dT<float>;
template class Conv2dT<double>;
template class Involution2dT<float>;
template class Involution2dT<double>;
template class BatchNormT<float>;
template class BatchNormT<double>;
template class MaxPool2T<float>;
template class MaxPool2T<double>;
template class LinearT<float>;
template class LinearT<double>;
template class ReluT<float>;
template class ReluT<double>;

template SoftmaxCeResult<float> softmax_cross_entropy<float>(const TensorT<float>&,
                                                             const std::vector<int>&);
template SoftmaxCeResult<double> softmax_cross_entropy<double>(const TensorT<double>&,
                                                               const std::vector<int>&);

} // namespace splice::nn
