#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ctxnmt/tensor.hpp"

namespace ctxnmt {

/// A named trainable tensor with its gradient slot.
template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar> value;
  Tensor<Scalar> grad;

  Index rows() const { return value.rows(); }
  Index cols() const { return value.cols(); }
};

/// Owns every trainable tensor of a model. Iteration order is insertion order,
/// which fixes the layout of checkpoints and the order of gradient reductions.
/// Parameter addresses are stable for the lifetime of the set.
template <typename Scalar>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet& other) { *this = other; }
  ParameterSet& operator=(const ParameterSet& other) {
    if (this == &other) return *this;
    params_.clear();
    index_.clear();
    for (const auto& p : other.params_) add(p->name, p->rows(), p->cols()).value = p->value;
    return *this;
  }
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;

  Parameter<Scalar>& add(const std::string& name, Index rows, Index cols) {
    if (index_.count(name)) throw ContractError("duplicate parameter '" + name + "'");
    auto p = std::make_unique<Parameter<Scalar>>();
    p->name = name;
    p->value = Tensor<Scalar>::Zero(rows, cols);
    p->grad = Tensor<Scalar>::Zero(rows, cols);
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  /// Overwrites values from a set with the same layout; addresses are kept.
  void assign_values(const ParameterSet& other) {
    if (other.size() != size()) throw ContractError("assign_values: parameter sets differ in size");
    for (std::size_t i = 0; i < size(); ++i) {
      if (params_[i]->name != other[i].name || params_[i]->value.rows() != other[i].rows() ||
          params_[i]->value.cols() != other[i].cols())
        throw ContractError("assign_values: layout differs at '" + other[i].name + "'");
      params_[i]->value = other[i].value;
    }
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Parameter<Scalar>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
    return *params_[it->second];
  }
  const Parameter<Scalar>& at(const std::string& name) const {
    return const_cast<ParameterSet*>(this)->at(name);
  }

  std::size_t size() const { return params_.size(); }
  Parameter<Scalar>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<Scalar>& operator[](std::size_t i) const { return *params_[i]; }

  /// Total number of scalars across all tensors.
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->grad.setZero();
  }

  template <typename F>
  void for_each(F&& f) {
    for (auto& p : params_) f(*p);
  }
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& p : params_) f(static_cast<const Parameter<Scalar>&>(*p));
  }

 private:
  std::vector<std::unique_ptr<Parameter<Scalar>>> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace ctxnmt
