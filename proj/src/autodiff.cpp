#include "banditseq/autodiff.hpp"

#include "banditseq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace banditseq {

const Tensor& Var::value() const {
    require(tape != nullptr, "uninitialized Var");
    return tape->node(id).value;
}

Var Tape::push(Tensor value, const char* op, BackwardFn backward, std::vector<std::size_t> parents,
               double aux, std::size_t aux_index) {
    if (!value.all_finite()) {
        throw NumericError(std::string("non-finite value produced by ") + op + " (node " +
                           std::to_string(nodes_.size()) + ")");
    }
    Node n;
    n.value = std::move(value);
    n.op = op;
    n.backward = backward;
    n.aux = aux;
    n.aux_index = aux_index;
    for (std::size_t p : parents) {
        require(p < nodes_.size(), "parent node out of range");
        n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
    }
    n.parents = std::move(parents);
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) { return push(std::move(value), "constant", nullptr, {}); }

Var Tape::param(ParamStore::Entry& entry) {
    for (const auto& [e, id] : bound_) {
        if (e == &entry) {
            return Var{this, id};
        }
    }
    Var v = push(entry.value, "param", nullptr, {});
    nodes_[v.id].requires_grad = true;
    nodes_[v.id].param = &entry;
    bound_.emplace_back(&entry, v.id);
    return v;
}

Tensor& Tape::grad(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
        n.grad = Tensor(n.value.shape(), 0.0);
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::backward(Var root) {
    require(root.tape == this, "backward root belongs to another tape");
    require(nodes_[root.id].value.size() == 1,
            "backward root must be scalar, got shape " + nodes_[root.id].value.shape_string());
    for (auto& n : nodes_) {
        n.has_grad = false;
    }
    grad(root.id)[0] = 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.has_grad || !n.requires_grad) {
            continue;
        }
        if (!n.grad.all_finite()) {
            throw NumericError(std::string("non-finite gradient at ") + n.op + " (node " +
                               std::to_string(i) + ")");
        }
        if (n.backward != nullptr) {
            n.backward(*this, i);
        }
    }
    for (const auto& [entry, id] : bound_) {
        const Node& n = nodes_[id];
        if (!n.has_grad) {
            continue;
        }
        double* dst = entry->grad.data();
        const double* src = n.grad.data();
        for (std::size_t k = 0; k < n.grad.size(); ++k) {
            dst[k] += src[k];
        }
    }
}

namespace {

const Tensor& val(Tape& t, std::size_t id) { return t.node(id).value; }

void require_same_shape(const Var& a, const Var& b, const char* op) {
    require(a.tape == b.tape, std::string(op) + ": operands on different tapes");
    require(a.value().same_shape(b.value()), std::string(op) + ": shape mismatch " +
                                                 a.value().shape_string() + " vs " +
                                                 b.value().shape_string());
}

bool is_vector(const Tensor& t) { return t.rank() == 1; }
bool is_matrix(const Tensor& t) { return t.rank() == 2; }

// Accumulate scale * src into the gradient of node id, if it wants one.
void accumulate(Tape& t, std::size_t id, const Tensor& src, double factor = 1.0) {
    if (!t.wants_grad(id)) {
        return;
    }
    Tensor& g = t.grad(id);
    double* d = g.data();
    const double* s = src.data();
    for (std::size_t k = 0; k < g.size(); ++k) {
        d[k] += factor * s[k];
    }
}

void add_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    accumulate(t, n.parents[0], n.grad);
    accumulate(t, n.parents[1], n.grad);
}

void sub_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    accumulate(t, n.parents[0], n.grad);
    accumulate(t, n.parents[1], n.grad, -1.0);
}

void mul_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    const std::size_t a = n.parents[0];
    const std::size_t b = n.parents[1];
    const std::size_t len = n.grad.size();
    if (t.wants_grad(a)) {
        Tensor& ga = t.grad(a);
        const Tensor& vb = val(t, b);
        for (std::size_t k = 0; k < len; ++k) {
            ga[k] += n.grad[k] * vb[k];
        }
    }
    if (t.wants_grad(b)) {
        Tensor& gb = t.grad(b);
        const Tensor& va = val(t, a);
        for (std::size_t k = 0; k < len; ++k) {
            gb[k] += n.grad[k] * va[k];
        }
    }
}

void scale_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    accumulate(t, n.parents[0], n.grad, n.aux);
}

void tanh_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    if (!t.wants_grad(n.parents[0])) {
        return;
    }
    Tensor& ga = t.grad(n.parents[0]);
    for (std::size_t k = 0; k < ga.size(); ++k) {
        const double y = n.value[k];
        ga[k] += n.grad[k] * (1.0 - y * y);
    }
}

void sigmoid_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    if (!t.wants_grad(n.parents[0])) {
        return;
    }
    Tensor& ga = t.grad(n.parents[0]);
    for (std::size_t k = 0; k < ga.size(); ++k) {
        const double y = n.value[k];
        ga[k] += n.grad[k] * y * (1.0 - y);
    }
}

void log_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    if (!t.wants_grad(n.parents[0])) {
        return;
    }
    Tensor& ga = t.grad(n.parents[0]);
    const Tensor& x = val(t, n.parents[0]);
    for (std::size_t k = 0; k < ga.size(); ++k) {
        ga[k] += n.grad[k] / x[k];
    }
}

void softmax_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    if (!t.wants_grad(n.parents[0])) {
        return;
    }
    double inner = 0.0;
    for (std::size_t k = 0; k < n.value.size(); ++k) {
        inner += n.grad[k] * n.value[k];
    }
    Tensor& ga = t.grad(n.parents[0]);
    for (std::size_t k = 0; k < ga.size(); ++k) {
        ga[k] += n.value[k] * (n.grad[k] - inner);
    }
}

void log_softmax_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    if (!t.wants_grad(n.parents[0])) {
        return;
    }
    double total = 0.0;
    for (std::size_t k = 0; k < n.grad.size(); ++k) {
        total += n.grad[k];
    }
    Tensor& ga = t.grad(n.parents[0]);
    for (std::size_t k = 0; k < ga.size(); ++k) {
        ga[k] += n.grad[k] - std::exp(n.value[k]) * total;
    }
}

void matvec_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    const std::size_t a = n.parents[0];
    const std::size_t x = n.parents[1];
    const Tensor& va = val(t, a);
    const Tensor& vx = val(t, x);
    const std::size_t rows = va.dim(0);
    const std::size_t cols = va.dim(1);
    if (t.wants_grad(a)) {
        double* ga = t.grad(a).data();
        for (std::size_t r = 0; r < rows; ++r) {
            const double g = n.grad[r];
            if (g == 0.0) {
                continue;
            }
            double* row_ptr = ga + r * cols;
            for (std::size_t c = 0; c < cols; ++c) {
                row_ptr[c] += g * vx[c];
            }
        }
    }
    if (t.wants_grad(x)) {
        double* gx = t.grad(x).data();
        const double* pa = va.data();
        for (std::size_t r = 0; r < rows; ++r) {
            const double g = n.grad[r];
            const double* row_ptr = pa + r * cols;
            for (std::size_t c = 0; c < cols; ++c) {
                gx[c] += g * row_ptr[c];
            }
        }
    }
}

void matvec_t_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    const std::size_t a = n.parents[0];
    const std::size_t x = n.parents[1];
    const Tensor& va = val(t, a);
    const Tensor& vx = val(t, x);
    const std::size_t rows = va.dim(0);
    const std::size_t cols = va.dim(1);
    if (t.wants_grad(a)) {
        double* ga = t.grad(a).data();
        for (std::size_t r = 0; r < rows; ++r) {
            const double xr = vx[r];
            double* row_ptr = ga + r * cols;
            for (std::size_t c = 0; c < cols; ++c) {
                row_ptr[c] += xr * n.grad[c];
            }
        }
    }
    if (t.wants_grad(x)) {
        Tensor& gx = t.grad(x);
        const double* pa = va.data();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* row_ptr = pa + r * cols;
            double acc = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
                acc += row_ptr[c] * n.grad[c];
            }
            gx[r] += acc;
        }
    }
}

void concat_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    std::size_t offset = 0;
    for (std::size_t p : n.parents) {
        const std::size_t len = val(t, p).size();
        if (t.wants_grad(p)) {
            Tensor& gp = t.grad(p);
            for (std::size_t k = 0; k < len; ++k) {
                gp[k] += n.grad[offset + k];
            }
        }
        offset += len;
    }
}

void slice_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    if (!t.wants_grad(n.parents[0])) {
        return;
    }
    Tensor& ga = t.grad(n.parents[0]);
    for (std::size_t k = 0; k < n.grad.size(); ++k) {
        ga[n.aux_index + k] += n.grad[k];
    }
}

void row_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    if (!t.wants_grad(n.parents[0])) {
        return;
    }
    Tensor& ga = t.grad(n.parents[0]);
    const std::size_t cols = n.grad.size();
    for (std::size_t k = 0; k < cols; ++k) {
        ga[n.aux_index * cols + k] += n.grad[k];
    }
}

void pick_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    if (!t.wants_grad(n.parents[0])) {
        return;
    }
    t.grad(n.parents[0])[n.aux_index] += n.grad[0];
}

void stack_rows_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    const std::size_t cols = n.value.dim(1);
    for (std::size_t r = 0; r < n.parents.size(); ++r) {
        const std::size_t p = n.parents[r];
        if (!t.wants_grad(p)) {
            continue;
        }
        Tensor& gp = t.grad(p);
        for (std::size_t k = 0; k < cols; ++k) {
            gp[k] += n.grad[r * cols + k];
        }
    }
}

void sum_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    if (!t.wants_grad(n.parents[0])) {
        return;
    }
    Tensor& ga = t.grad(n.parents[0]);
    for (std::size_t k = 0; k < ga.size(); ++k) {
        ga[k] += n.grad[0];
    }
}

void dot_backward(Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    const std::size_t a = n.parents[0];
    const std::size_t b = n.parents[1];
    accumulate(t, a, val(t, b), n.grad[0]);
    accumulate(t, b, val(t, a), n.grad[0]);
}

template <typename F>
Tensor map_values(const Tensor& in, F f) {
    Tensor out = in;
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = f(in[k]);
    }
    return out;
}

} // namespace

Var add(Var a, Var b) {
    require_same_shape(a, b, "add");
    Tensor out = a.value();
    const Tensor& vb = b.value();
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] += vb[k];
    }
    return a.tape->push(std::move(out), "add", add_backward, {a.id, b.id});
}

Var sub(Var a, Var b) {
    require_same_shape(a, b, "sub");
    Tensor out = a.value();
    const Tensor& vb = b.value();
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] -= vb[k];
    }
    return a.tape->push(std::move(out), "sub", sub_backward, {a.id, b.id});
}

Var mul(Var a, Var b) {
    require_same_shape(a, b, "mul");
    Tensor out = a.value();
    const Tensor& vb = b.value();
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] *= vb[k];
    }
    return a.tape->push(std::move(out), "mul", mul_backward, {a.id, b.id});
}

Var scale(Var a, double factor) {
    Tensor out = map_values(a.value(), [factor](double v) { return factor * v; });
    return a.tape->push(std::move(out), "scale", scale_backward, {a.id}, factor);
}

Var tanh(Var a) {
    Tensor out = map_values(a.value(), [](double v) { return std::tanh(v); });
    return a.tape->push(std::move(out), "tanh", tanh_backward, {a.id});
}

Var sigmoid(Var a) {
    Tensor out = map_values(a.value(), [](double v) {
        if (v >= 0.0) {
            return 1.0 / (1.0 + std::exp(-v));
        }
        const double e = std::exp(v);
        return e / (1.0 + e);
    });
    return a.tape->push(std::move(out), "sigmoid", sigmoid_backward, {a.id});
}

Var log(Var a) {
    Tensor out = map_values(a.value(), [](double v) { return std::log(v); });
    return a.tape->push(std::move(out), "log", log_backward, {a.id});
}

Var softmax(Var a) {
    require(is_vector(a.value()), "softmax expects a vector");
    const Tensor& in = a.value();
    const double mx = *std::max_element(in.values().begin(), in.values().end());
    Tensor out = in;
    double total = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = std::exp(in[k] - mx);
        total += out[k];
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] /= total;
    }
    return a.tape->push(std::move(out), "softmax", softmax_backward, {a.id});
}

Var log_softmax(Var a) {
    require(is_vector(a.value()), "log_softmax expects a vector");
    const Tensor& in = a.value();
    const double mx = *std::max_element(in.values().begin(), in.values().end());
    double total = 0.0;
    for (double v : in.values()) {
        total += std::exp(v - mx);
    }
    const double lse = mx + std::log(total);
    Tensor out = map_values(in, [lse](double v) { return v - lse; });
    return a.tape->push(std::move(out), "log_softmax", log_softmax_backward, {a.id});
}

Var matvec(Var m, Var x) {
    const Tensor& vm = m.value();
    const Tensor& vx = x.value();
    require(is_matrix(vm) && is_vector(vx) && vm.dim(1) == vx.size(),
            "matvec shape mismatch " + vm.shape_string() + " x " + vx.shape_string());
    const std::size_t rows = vm.dim(0);
    const std::size_t cols = vm.dim(1);
    Tensor out({rows}, 0.0);
    const double* pm = vm.data();
    const double* px = vx.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row_ptr = pm + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            acc += row_ptr[c] * px[c];
        }
        out[r] = acc;
    }
    return m.tape->push(std::move(out), "matvec", matvec_backward, {m.id, x.id});
}

Var matvec_t(Var m, Var x) {
    const Tensor& vm = m.value();
    const Tensor& vx = x.value();
    require(is_matrix(vm) && is_vector(vx) && vm.dim(0) == vx.size(),
            "matvec_t shape mismatch " + vm.shape_string() + " x " + vx.shape_string());
    const std::size_t rows = vm.dim(0);
    const std::size_t cols = vm.dim(1);
    Tensor out({cols}, 0.0);
    const double* pm = vm.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double xr = vx[r];
        const double* row_ptr = pm + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            out[c] += xr * row_ptr[c];
        }
    }
    return m.tape->push(std::move(out), "matvec_t", matvec_t_backward, {m.id, x.id});
}

Var concat(std::span<const Var> parts) {
    require(!parts.empty(), "concat needs at least one part");
    std::size_t total = 0;
    for (const Var& p : parts) {
        require(p.tape == parts[0].tape, "concat: operands on different tapes");
        require(is_vector(p.value()), "concat expects vectors");
        total += p.value().size();
    }
    std::vector<double> values;
    values.reserve(total);
    std::vector<std::size_t> parents;
    parents.reserve(parts.size());
    for (const Var& p : parts) {
        const auto v = p.value().values();
        values.insert(values.end(), v.begin(), v.end());
        parents.push_back(p.id);
    }
    return parts[0].tape->push(Tensor({total}, std::move(values)), "concat", concat_backward,
                               std::move(parents));
}

Var slice(Var a, std::size_t offset, std::size_t length) {
    const Tensor& va = a.value();
    require(is_vector(va) && length > 0 && offset + length <= va.size(), "slice out of range");
    std::vector<double> values(va.data() + offset, va.data() + offset + length);
    return a.tape->push(Tensor({length}, std::move(values)), "slice", slice_backward, {a.id}, 0.0,
                        offset);
}

Var row(Var m, std::size_t index) {
    const Tensor& vm = m.value();
    require(is_matrix(vm), "row expects a matrix");
    require(index < vm.dim(0), "row index " + std::to_string(index) + " out of range for " +
                                   vm.shape_string());
    const std::size_t cols = vm.dim(1);
    std::vector<double> values(vm.data() + index * cols, vm.data() + (index + 1) * cols);
    return m.tape->push(Tensor({cols}, std::move(values)), "row", row_backward, {m.id}, 0.0, index);
}

Var pick(Var a, std::size_t index) {
    const Tensor& va = a.value();
    require(is_vector(va) && index < va.size(), "pick index out of range");
    return a.tape->push(Tensor::scalar(va[index]), "pick", pick_backward, {a.id}, 0.0, index);
}

Var stack_rows(std::span<const Var> rows) {
    require(!rows.empty(), "stack_rows needs at least one row");
    const std::size_t cols = rows[0].value().size();
    std::vector<double> values;
    values.reserve(rows.size() * cols);
    std::vector<std::size_t> parents;
    parents.reserve(rows.size());
    for (const Var& r : rows) {
        require(r.tape == rows[0].tape, "stack_rows: operands on different tapes");
        require(is_vector(r.value()) && r.value().size() == cols, "stack_rows: ragged rows");
        const auto v = r.value().values();
        values.insert(values.end(), v.begin(), v.end());
        parents.push_back(r.id);
    }
    return rows[0].tape->push(Tensor({rows.size(), cols}, std::move(values)), "stack_rows",
                              stack_rows_backward, std::move(parents));
}

Var sum(Var a) {
    double total = 0.0;
    for (double v : a.value().values()) {
        total += v;
    }
    return a.tape->push(Tensor::scalar(total), "sum", sum_backward, {a.id});
}

Var dot(Var a, Var b) {
    require_same_shape(a, b, "dot");
    const Tensor& va = a.value();
    const Tensor& vb = b.value();
    double total = 0.0;
    for (std::size_t k = 0; k < va.size(); ++k) {
        total += va[k] * vb[k];
    }
    return a.tape->push(Tensor::scalar(total), "dot", dot_backward, {a.id, b.id});
}

} // namespace banditseq
