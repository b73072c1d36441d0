#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "sthar/error.hpp"
#include "sthar/tensor.hpp"

namespace sthar {

// Named map of trainable tensors. std::map keeps iteration lexicographic,
// which fixes reduction and update orders across runs.
template <typename T>
class ParamStore {
public:
    Tensor<T>& add(const std::string& name, Tensor<T> t) {
        t.set_requires_grad(true);
        auto [it, inserted] = params_.emplace(name, std::move(t));
        if (!inserted) throw ContractError("param store: duplicate name '" + name + "'");
        return it->second;
    }

    Tensor<T>& get(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("param store: unknown name '" + name + "'");
        return it->second;
    }
    const Tensor<T>& get(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("param store: unknown name '" + name + "'");
        return it->second;
    }

    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    // Optimizer steps rebind names to fresh tensors; the old tensor stays
    // owned by any live graph.
    void replace(const std::string& name, Tensor<T> t) {
        t.set_requires_grad(true);
        get(name);  // existence check
        params_.insert_or_assign(name, std::move(t));
    }

    void zero_grad() {
        for (auto& [name, t] : params_) t.zero_grad();
    }

    double grad_norm() const {
        double acc = 0;
        for (const auto& [name, t] : params_)
            for (auto g : t.grad()) acc += double(g) * double(g);
        return std::sqrt(acc);
    }

    std::size_t size() const { return params_.size(); }
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::map<std::string, Tensor<T>> params_;
};

}  // namespace sthar
