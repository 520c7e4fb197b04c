#include "params.hpp"

namespace denssiam {

template <typename T>
Param<T>& ParamStore<T>::add(const std::string& name, Tensor<T> init,
                             bool trainable) {
  if (index_.count(name)) {
    throw ContractError("parameter name registered twice: " + name);
  }
  auto p = std::make_unique<Param<T>>();
  p->name = name;
  p->trainable = trainable;
  if (trainable) {
    p->grad = Tensor<T>(init.shape());
    p->velocity = Tensor<T>(init.shape());
  }
  p->value = std::move(init);
  Param<T>* raw = p.get();
  items_.push_back(std::move(p));
  index_[name] = raw;
  return *raw;
}

template <typename T>
Param<T>& ParamStore<T>::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return *it->second;
}

template <typename T>
const Param<T>& ParamStore<T>::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return *it->second;
}

template <typename T>
Param<T>* ParamStore<T>::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}

template <typename T>
void ParamStore<T>::zero_grads() {
  for (auto& p : items_) {
    if (p->trainable) p->grad.zero();
  }
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace denssiam
