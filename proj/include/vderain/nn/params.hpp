#pragma once

#include <cmath>
#include <type_traits>
#include <string>
#include <utility>
#include <vector>

#include "vderain/tensor.hpp"

namespace vderain::nn {

// Parameter structs expose `template <class Self, class F> static void
// visit(Self&, F&&)` calling f(name, tensor) for each learnable tensor in a
// fixed order. Everything below is written against that hook.

template <class P, class F>
void for_each_param(P& params, F&& f) {
  P::visit(params, std::forward<F>(f));
}
template <class P, class F>
void for_each_param(const P& params, F&& f) {
  P::visit(params, std::forward<F>(f));
}

template <class P>
auto param_tensors(P& params) {
  using T = typename P::value_type;
  std::vector<Tensor<T>*> out;
  for_each_param(params, [&](const std::string&, Tensor<T>& t) { out.push_back(&t); });
  return out;
}

template <class P>
auto param_tensors(const P& params) {
  using T = typename P::value_type;
  std::vector<const Tensor<T>*> out;
  for_each_param(params, [&](const std::string&, const Tensor<T>& t) { out.push_back(&t); });
  return out;
}

template <class P>
P zeros_like(const P& params) {
  P out = params;
  for (auto* t : param_tensors(out)) t->fill(0);
  return out;
}

template <class P>
void set_zero(P& params) {
  for (auto* t : param_tensors(params)) t->fill(0);
}

template <class P>
double param_squared_norm(const P& params) {
  double acc = 0;
  for (const auto* t : param_tensors(params))
    for (auto v : *t) acc += static_cast<double>(v) * static_cast<double>(v);
  return acc;
}

template <class P>
std::size_t param_count(const P& params) {
  std::size_t n = 0;
  for (const auto* t : param_tensors(params)) n += t->size();
  return n;
}

template <class P>
bool params_finite(const P& params) {
  for (const auto* t : param_tensors(params))
    if (!all_finite(*t)) return false;
  return true;
}

template <class P>
bool params_equal(const P& a, const P& b) {
  const auto ta = param_tensors(a), tb = param_tensors(b);
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i)
    if (!(*ta[i] == *tb[i])) return false;
  return true;
}

template <class P>
std::vector<std::string> param_names(const P& params) {
  std::vector<std::string> names;
  for_each_param(params, [&](const std::string& name, const auto&) { names.push_back(name); });
  return names;
}

}  // namespace vderain::nn
