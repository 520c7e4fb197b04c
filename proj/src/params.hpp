#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "tensor.hpp"

namespace denssiam {

// One named tensor in the store. Trainable entries carry an accumulated
// gradient and an optimizer velocity of the same shape; state entries
// (BN running stats) carry only the value but still serialize.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> velocity;
  bool trainable = true;
};

// Insertion-ordered named parameter collection; the unit of checkpointing.
template <typename T>
class ParamStore {
 public:
  Param<T>& add(const std::string& name, Tensor<T> init, bool trainable = true);

  Param<T>& at(const std::string& name);
  const Param<T>& at(const std::string& name) const;
  Param<T>* find(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::size_t count() const { return items_.size(); }
  Param<T>& item(std::size_t i) { return *items_[i]; }
  const Param<T>& item(std::size_t i) const { return *items_[i]; }

  void zero_grads();

 private:
  std::vector<std::unique_ptr<Param<T>>> items_;
  std::unordered_map<std::string, Param<T>*> index_;
};

using ParamStoreF = ParamStore<float>;
using ParamStoreD = ParamStore<double>;

}  // namespace denssiam
