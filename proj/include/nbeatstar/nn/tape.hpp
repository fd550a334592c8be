#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "nbeatstar/nn/tensor.hpp"
#include "nbeatstar/util/hash.hpp"

namespace nbeatstar::nn {

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
    std::size_t id = 0;
};

/// Reverse-mode recorder for the batched operations the forecaster needs.
///
/// Nodes are appended in evaluation order, so a reverse sweep is a valid
/// topological order. In inference mode no backward closures are kept.
/// A tape is single-use: backward() may run once.
class Tape {
public:
    enum class Mode { Record, Inference };
    using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

    explicit Tape(Mode mode = Mode::Record) : mode_(mode) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    [[nodiscard]] bool recording() const { return mode_ == Mode::Record; }

    Var constant(Matrix v) {
        nodes_.push_back(Node{std::move(v), nullptr, {}, {}, npos, false});
        return Var{nodes_.size() - 1};
    }

    /// Leaf bound to slot `index` of `params`; the set must outlive the tape.
    Var parameter(const ParameterSet& params, std::size_t index) {
        if (params_ && params_ != &params) throw std::logic_error("tape already bound to another parameter set");
        params_ = &params;
        nodes_.push_back(Node{Matrix{}, &params.value(index), {}, {}, index, recording()});
        return Var{nodes_.size() - 1};
    }

    /// Appends an op result. `parents_need_grad` decides whether `fn` is kept.
    Var push(Matrix value, bool parents_need_grad, BackwardFn fn) {
        bool keep = recording() && parents_need_grad;
        nodes_.push_back(Node{std::move(value), nullptr, {}, keep ? std::move(fn) : BackwardFn{}, npos, keep});
        return Var{nodes_.size() - 1};
    }

    [[nodiscard]] const Matrix& value(Var v) const {
        const Node& n = nodes_.at(v.id);
        return n.ref ? *n.ref : n.value;
    }
    [[nodiscard]] bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }

    void accumulate(Var v, const Matrix& g) {
        Node& n = nodes_[v.id];
        if (!n.needs_grad) return;
        if (n.grad.size() == 0) {
            n.grad = g;
        } else {
            n.grad += g;
        }
    }

    void accumulate(Var v, Matrix&& g) {
        Node& n = nodes_[v.id];
        if (!n.needs_grad) return;
        if (n.grad.size() == 0) {
            n.grad = std::move(g);
        } else {
            n.grad += g;
        }
    }

    /// Runs the reverse sweep from a 1x1 node. Parameters never reached get zero gradient.
    Gradients backward(Var loss) {
        if (!recording()) throw std::logic_error("backward() on an inference tape");
        if (consumed_) throw std::logic_error("backward() called twice on the same tape; re-record the forward pass");
        const Matrix& lv = value(loss);
        if (lv.rows() != 1 || lv.cols() != 1) throw std::invalid_argument("backward() requires a scalar loss node");
        consumed_ = true;

        Gradients grads = params_ ? zero_gradients(*params_) : Gradients{};
        nodes_[loss.id].grad = Matrix::Ones(1, 1);
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.grad.size() == 0) continue;
            if (n.param != npos) {
                grads[n.param] += n.grad;
            } else if (n.backward) {
                Matrix g = std::move(n.grad);
                n.backward(*this, g);
            }
        }
        return grads;
    }

    /// Order-sensitive hash of branch decisions (ReLU masks, pinball sides).
    /// Finite-difference checks compare it to detect kink crossings.
    void mix_signature(std::uint64_t v) { signature_ = util::mix(signature_, v); }
    [[nodiscard]] std::uint64_t signature() const { return signature_; }

    [[nodiscard]] std::size_t size() const { return nodes_.size(); }

private:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    struct Node {
        Matrix value;
        const Matrix* ref;
        Matrix grad;
        BackwardFn backward;
        std::size_t param;
        bool needs_grad;
    };

    Mode mode_;
    std::vector<Node> nodes_;
    const ParameterSet* params_ = nullptr;
    bool consumed_ = false;
    std::uint64_t signature_ = 0;
};

}  // namespace nbeatstar::nn
