#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nbeatstar/util/error.hpp"

namespace nbeatstar::nn {

/// Row-major so that a batch row is one contiguous sample.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Named trainable tensors. Biases are stored as 1 x out matrices.
class ParameterSet {
public:
    std::size_t add(std::string name, Matrix value) {
        if (find(name)) throw Error("duplicate parameter name '" + name + "'");
        names_.push_back(std::move(name));
        values_.push_back(std::move(value));
        return values_.size() - 1;
    }

    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] const Matrix& value(std::size_t i) const { return values_.at(i); }
    Matrix& value(std::size_t i) { return values_.at(i); }
    [[nodiscard]] const std::string& name(std::size_t i) const { return names_.at(i); }

    [[nodiscard]] std::optional<std::size_t> find(const std::string& name) const {
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (names_[i] == name) return i;
        }
        return std::nullopt;
    }

    [[nodiscard]] std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
        return n;
    }

    bool operator==(const ParameterSet& o) const { return names_ == o.names_ && values_ == o.values_; }

private:
    std::vector<std::string> names_;
    std::vector<Matrix> values_;
};

/// d(loss)/d(parameter), one entry per ParameterSet slot.
using Gradients = std::vector<Matrix>;

inline Gradients zero_gradients(const ParameterSet& p) {
    Gradients g;
    g.reserve(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) g.push_back(Matrix::Zero(p.value(i).rows(), p.value(i).cols()));
    return g;
}

}  // namespace nbeatstar::nn
