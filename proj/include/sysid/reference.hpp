#pragma once

#include <cstddef>

#include "sysid/nn.hpp"
#include "sysid/tensor.hpp"

namespace sysid::ref {

/// Textbook scalar-loop forward pass over one sequence, written
/// independently of the production kernels. Used as a correctness oracle in
/// the tests and as the serial baseline in the kernel benchmark.
/// features is (batch, time, in_dim); only sequence seq is evaluated.
/// Returns (time, out_dim) predictions.
Tensor forward_sequence(const nn::Network& net, const Tensor& features, std::size_t seq);

/// Plain two-pass mean squared error (sum then divide), no compensation.
double mse_two_pass(const Tensor& pred, const Tensor& target);

}  // namespace sysid::ref
