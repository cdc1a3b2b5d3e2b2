#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "feedback_clf/error.hpp"
#include "feedback_clf/tensor.hpp"

namespace fbclf {

template <class T>
struct Param {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;
  bool trainable = true;  // false for running statistics
};

/// Named parameters with paired gradient buffers, kept in insertion order.
template <class T>
class ParamStore {
 public:
  Param<T>& add(std::string name, Shape shape, bool trainable = true) {
    if (index_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    index_.emplace(name, params_.size());
    params_.push_back(Param<T>{name, BasicTensor<T>(shape), BasicTensor<T>(shape), trainable});
    return params_.back();
  }

  bool contains(std::string_view name) const { return index_.contains(std::string(name)); }

  Param<T>& get(std::string_view name) { return params_[slot(name)]; }
  const Param<T>& get(std::string_view name) const { return params_[slot(name)]; }

  BasicTensor<T>& value(std::string_view name) { return get(name).value; }
  const BasicTensor<T>& value(std::string_view name) const { return get(name).value; }
  BasicTensor<T>& grad(std::string_view name) { return get(name).grad; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  void zero_grad() {
    for (auto& p : params_) p.grad.zero();
  }

  /// Number of trainable scalars.
  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.trainable ? p.value.size() : 0;
    return n;
  }

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& p : params_) {
      auto& q = out.add(p.name, p.value.shape(), p.trainable);
      q.value = p.value.template cast<U>();
    }
    return out;
  }

 private:
  std::size_t slot(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
    return it->second;
  }

  std::vector<Param<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace fbclf
