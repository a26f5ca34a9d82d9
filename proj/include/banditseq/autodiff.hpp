#pragma once

#include "banditseq/param_store.hpp"
#include "banditseq/tensor.hpp"

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace banditseq {

class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    double item() const { return value().item(); }
};

// Define-by-run reverse-mode tape. Nodes are appended in evaluation order, so
// the node vector is already a topological order and backward() walks it in
// reverse. Build one tape per example and discard it afterwards.
class Tape {
  public:
    using BackwardFn = void (*)(Tape&, std::size_t);

    struct Node {
        Tensor value;
        Tensor grad;
        bool has_grad = false;
        bool requires_grad = false;
        const char* op = "";
        BackwardFn backward = nullptr;
        std::vector<std::size_t> parents;
        double aux = 0.0;
        std::size_t aux_index = 0;
        ParamStore::Entry* param = nullptr;
    };

    Tape() { nodes_.reserve(1024); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);

    // Leaf bound to a parameter. backward() adds into entry.grad. Repeated
    // calls with the same entry return the same node.
    Var param(ParamStore::Entry& entry);
    Var param(ParamStore& store, std::string_view name) { return param(store.at(name)); }

    // Accumulates d(root)/d(param) into every bound parameter's gradient.
    // root must be a single-element node.
    void backward(Var root);

    std::size_t size() const { return nodes_.size(); }
    const Node& node(std::size_t id) const { return nodes_[id]; }

    // Used by primitive implementations.
    Var push(Tensor value, const char* op, BackwardFn backward, std::vector<std::size_t> parents,
             double aux = 0.0, std::size_t aux_index = 0);
    Node& node_mut(std::size_t id) { return nodes_[id]; }
    Tensor& grad(std::size_t id);
    bool wants_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  private:
    std::vector<Node> nodes_;
    std::vector<std::pair<ParamStore::Entry*, std::size_t>> bound_;
};

// Primitives. Shapes: vectors are rank 1, matrices rank 2, scalars rank 0 or
// single-element. Every primitive checks its output for NaN/Inf.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var tanh(Var a);
Var sigmoid(Var a);
Var log(Var a);
Var softmax(Var a);
Var log_softmax(Var a);
Var matvec(Var matrix, Var x);   // matrix [m,n] times x [n] -> [m]
Var matvec_t(Var matrix, Var x); // transpose(matrix [m,n]) times x [m] -> [n]
Var concat(std::span<const Var> parts);
Var slice(Var a, std::size_t offset, std::size_t length);
Var row(Var matrix, std::size_t index);     // index-select of one row
Var pick(Var a, std::size_t index);         // one element of a vector, as a scalar
Var stack_rows(std::span<const Var> rows);  // k vectors of length n -> [k,n]
Var sum(Var a);
Var dot(Var a, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

} // namespace banditseq
