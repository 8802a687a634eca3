#include "kt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "kt/rng.hpp"

namespace kt {

namespace {

std::string shape_str(const std::vector<int>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out + ")";
}

void require_rank2(const TensorPtr& t, const char* op) {
    if (t->shape.size() != 2) {
        throw std::invalid_argument(std::string(op) + ": expected rank-2 tensor, got " +
                                    shape_str(t->shape));
    }
}

// C[n,m] += A[n,k] * B[k,m], all row-major contiguous.
void mm_accum(const double* a, int n, int k, const double* b, int m, double* c) {
    for (int i = 0; i < n; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + static_cast<std::size_t>(p) * m;
            for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

std::vector<double> transposed(const std::vector<double>& in, int rows, int cols) {
    std::vector<double> out(in.size());
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            out[static_cast<std::size_t>(j) * rows + i] = in[static_cast<std::size_t>(i) * cols + j];
        }
    }
    return out;
}

constexpr double kBceClampLo = 1e-7;
constexpr double kBceClampHi = 1.0 - 1e-7;

}  // namespace

TensorPtr Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    std::int64_t n = 1;
    for (int d : t->shape) {
        if (d <= 0) throw std::invalid_argument("tensor dims must be positive");
        n *= d;
    }
    t->data.assign(static_cast<std::size_t>(n), 0.0);
    t->requires_grad = requires_grad;
    if (requires_grad) t->grad.assign(t->data.size(), 0.0);
    return t;
}

TensorPtr Tensor::from(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    auto t = Tensor::zeros(std::move(shape), requires_grad);
    if (data.size() != t->data.size()) {
        throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(t->shape));
    }
    t->data = std::move(data);
    return t;
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
    return Tensor::from({1}, {value}, requires_grad);
}

void Tape::record(std::function<void()> fn) {
    consumed_ = false;
    nodes_.push_back({std::move(fn)});
}

TensorPtr Tape::matmul(const TensorPtr& a, const TensorPtr& b, bool trans_a, bool trans_b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const int n = trans_a ? a->shape[1] : a->shape[0];
    const int k = trans_a ? a->shape[0] : a->shape[1];
    const int kb = trans_b ? b->shape[1] : b->shape[0];
    const int m = trans_b ? b->shape[0] : b->shape[1];
    if (k != kb) {
        throw std::invalid_argument("matmul: shape mismatch " + shape_str(a->shape) +
                                    (trans_a ? "^T" : "") + " * " + shape_str(b->shape) +
                                    (trans_b ? "^T" : ""));
    }
    // Materialize operands contiguously so one kernel covers all flag combos.
    auto at = std::make_shared<std::vector<double>>(
        trans_a ? transposed(a->data, a->shape[0], a->shape[1]) : a->data);
    auto bt = std::make_shared<std::vector<double>>(
        trans_b ? transposed(b->data, b->shape[0], b->shape[1]) : b->data);

    auto out = Tensor::zeros({n, m}, a->requires_grad || b->requires_grad);
    mm_accum(at->data(), n, k, bt->data(), m, out->data.data());

    if (out->requires_grad) {
        record([a, b, at, bt, out, n, k, m, trans_a, trans_b]() {
            if (a->requires_grad) {
                a->ensure_grad();
                // d(op_a(A)) = dC * op_b(B)^T
                std::vector<double> da(static_cast<std::size_t>(n) * k, 0.0);
                const std::vector<double> btT = transposed(*bt, k, m);
                mm_accum(out->grad.data(), n, m, btT.data(), k, da.data());
                if (trans_a) da = transposed(da, n, k);
                for (std::size_t i = 0; i < da.size(); ++i) a->grad[i] += da[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                // d(op_b(B)) = op_a(A)^T * dC
                std::vector<double> db(static_cast<std::size_t>(k) * m, 0.0);
                const std::vector<double> atT = transposed(*at, n, k);
                mm_accum(atT.data(), k, n, out->grad.data(), m, db.data());
                if (trans_b) db = transposed(db, k, m);
                for (std::size_t i = 0; i < db.size(); ++i) b->grad[i] += db[i];
            }
        });
    }
    return out;
}

TensorPtr Tape::add(const TensorPtr& a, const TensorPtr& b) {
    const bool same = a->shape == b->shape;
    const bool bcast = !same && b->size() == a->cols() && a->shape.size() == 2;
    if (!same && !bcast) {
        throw std::invalid_argument("add: shape mismatch " + shape_str(a->shape) + " + " +
                                    shape_str(b->shape));
    }
    auto out = Tensor::zeros(a->shape, a->requires_grad || b->requires_grad);
    if (same) {
        for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
    } else {
        const int rows = a->shape[0];
        const int cols = a->shape[1];
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < cols; ++j) {
                out->data[static_cast<std::size_t>(i) * cols + j] =
                    a->data[static_cast<std::size_t>(i) * cols + j] + b->data[j];
            }
        }
    }
    if (out->requires_grad) {
        record([a, b, out, same]() {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += out->grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                if (same) {
                    for (std::size_t i = 0; i < b->grad.size(); ++i) b->grad[i] += out->grad[i];
                } else {
                    const int rows = a->shape[0];
                    const int cols = a->shape[1];
                    for (int i = 0; i < rows; ++i) {
                        for (int j = 0; j < cols; ++j) {
                            b->grad[j] += out->grad[static_cast<std::size_t>(i) * cols + j];
                        }
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr Tape::mul(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) {
        throw std::invalid_argument("mul: shape mismatch " + shape_str(a->shape) + " * " +
                                    shape_str(b->shape));
    }
    auto out = Tensor::zeros(a->shape, a->requires_grad || b->requires_grad);
    for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] * b->data[i];
    if (out->requires_grad) {
        record([a, b, out]() {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < a->grad.size(); ++i) {
                    a->grad[i] += out->grad[i] * b->data[i];
                }
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < b->grad.size(); ++i) {
                    b->grad[i] += out->grad[i] * a->data[i];
                }
            }
        });
    }
    return out;
}

TensorPtr Tape::scale(const TensorPtr& a, double factor) {
    auto out = Tensor::zeros(a->shape, a->requires_grad);
    for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] * factor;
    if (out->requires_grad) {
        record([a, out, factor]() {
            a->ensure_grad();
            for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += out->grad[i] * factor;
        });
    }
    return out;
}

TensorPtr Tape::concat(const std::vector<TensorPtr>& xs, int axis) {
    if (xs.empty()) throw std::invalid_argument("concat: no inputs");
    if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
    bool rg = false;
    for (const auto& x : xs) {
        require_rank2(x, "concat");
        rg = rg || x->requires_grad;
    }
    int rows = xs[0]->shape[0];
    int cols = xs[0]->shape[1];
    if (axis == 0) {
        rows = 0;
        for (const auto& x : xs) {
            if (x->shape[1] != cols) {
                throw std::invalid_argument("concat axis 0: column mismatch " +
                                            shape_str(x->shape));
            }
            rows += x->shape[0];
        }
    } else {
        cols = 0;
        for (const auto& x : xs) {
            if (x->shape[0] != rows) {
                throw std::invalid_argument("concat axis 1: row mismatch " + shape_str(x->shape));
            }
            cols += x->shape[1];
        }
    }
    auto out = Tensor::zeros({rows, cols}, rg);
    if (axis == 0) {
        std::size_t off = 0;
        for (const auto& x : xs) {
            std::copy(x->data.begin(), x->data.end(), out->data.begin() + off);
            off += x->data.size();
        }
    } else {
        int col_off = 0;
        for (const auto& x : xs) {
            const int xc = x->shape[1];
            for (int i = 0; i < rows; ++i) {
                std::copy(x->data.begin() + static_cast<std::size_t>(i) * xc,
                          x->data.begin() + static_cast<std::size_t>(i + 1) * xc,
                          out->data.begin() + static_cast<std::size_t>(i) * cols + col_off);
            }
            col_off += xc;
        }
    }
    if (rg) {
        record([xs, out, axis, rows, cols]() {
            if (axis == 0) {
                std::size_t off = 0;
                for (const auto& x : xs) {
                    if (x->requires_grad) {
                        x->ensure_grad();
                        for (std::size_t i = 0; i < x->grad.size(); ++i) {
                            x->grad[i] += out->grad[off + i];
                        }
                    }
                    off += x->data.size();
                }
            } else {
                int col_off = 0;
                for (const auto& x : xs) {
                    const int xc = x->shape[1];
                    if (x->requires_grad) {
                        x->ensure_grad();
                        for (int i = 0; i < rows; ++i) {
                            for (int j = 0; j < xc; ++j) {
                                x->grad[static_cast<std::size_t>(i) * xc + j] +=
                                    out->grad[static_cast<std::size_t>(i) * cols + col_off + j];
                            }
                        }
                    }
                    col_off += xc;
                }
            }
        });
    }
    return out;
}

TensorPtr Tape::row_gather(const TensorPtr& a, std::vector<int> idx) {
    require_rank2(a, "row_gather");
    const int src_rows = a->shape[0];
    const int cols = a->shape[1];
    for (int i : idx) {
        if (i < -1 || i >= src_rows) {
            throw std::out_of_range("row_gather: index " + std::to_string(i) +
                                    " out of range for " + std::to_string(src_rows) + " rows");
        }
    }
    auto out = Tensor::zeros({static_cast<int>(idx.size()), cols}, a->requires_grad);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= 0) {
            std::copy(a->data.begin() + static_cast<std::size_t>(idx[r]) * cols,
                      a->data.begin() + static_cast<std::size_t>(idx[r] + 1) * cols,
                      out->data.begin() + r * cols);
        }
    }
    if (out->requires_grad) {
        auto indices = std::make_shared<std::vector<int>>(std::move(idx));
        record([a, out, indices, cols]() {
            a->ensure_grad();
            for (std::size_t r = 0; r < indices->size(); ++r) {
                const int src = (*indices)[r];
                if (src < 0) continue;
                for (int j = 0; j < cols; ++j) {
                    a->grad[static_cast<std::size_t>(src) * cols + j] +=
                        out->grad[r * cols + j];
                }
            }
        });
    }
    return out;
}

TensorPtr Tape::sigmoid(const TensorPtr& a) {
    auto out = Tensor::zeros(a->shape, a->requires_grad);
    for (std::size_t i = 0; i < a->data.size(); ++i) {
        const double x = a->data[i];
        out->data[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    if (out->requires_grad) {
        record([a, out]() {
            a->ensure_grad();
            for (std::size_t i = 0; i < a->grad.size(); ++i) {
                const double y = out->data[i];
                a->grad[i] += out->grad[i] * y * (1.0 - y);
            }
        });
    }
    return out;
}

TensorPtr Tape::tanh(const TensorPtr& a) {
    auto out = Tensor::zeros(a->shape, a->requires_grad);
    for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = std::tanh(a->data[i]);
    if (out->requires_grad) {
        record([a, out]() {
            a->ensure_grad();
            for (std::size_t i = 0; i < a->grad.size(); ++i) {
                const double y = out->data[i];
                a->grad[i] += out->grad[i] * (1.0 - y * y);
            }
        });
    }
    return out;
}

TensorPtr Tape::relu(const TensorPtr& a) {
    auto out = Tensor::zeros(a->shape, a->requires_grad);
    for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = std::max(0.0, a->data[i]);
    if (out->requires_grad) {
        record([a, out]() {
            a->ensure_grad();
            for (std::size_t i = 0; i < a->grad.size(); ++i) {
                if (a->data[i] > 0.0) a->grad[i] += out->grad[i];
            }
        });
    }
    return out;
}

TensorPtr Tape::dropout(const TensorPtr& a, double rate, bool train, std::uint64_t key) {
    if (rate < 0.0 || rate >= 1.0) {
        throw std::invalid_argument("dropout: rate must be in [0, 1)");
    }
    if (!train || rate == 0.0) {
        auto out = Tensor::zeros(a->shape, a->requires_grad);
        out->data = a->data;
        if (out->requires_grad) {
            record([a, out]() {
                a->ensure_grad();
                for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += out->grad[i];
            });
        }
        return out;
    }
    auto keep = std::make_shared<std::vector<std::uint8_t>>(a->data.size());
    const double inv_keep = 1.0 / (1.0 - rate);
    auto out = Tensor::zeros(a->shape, a->requires_grad);
    for (std::size_t i = 0; i < a->data.size(); ++i) {
        const bool k = rng::counter_uniform(key, i) >= rate;
        (*keep)[i] = k;
        out->data[i] = k ? a->data[i] * inv_keep : 0.0;
    }
    if (out->requires_grad) {
        record([a, out, keep, inv_keep]() {
            a->ensure_grad();
            for (std::size_t i = 0; i < a->grad.size(); ++i) {
                if ((*keep)[i]) a->grad[i] += out->grad[i] * inv_keep;
            }
        });
    }
    return out;
}

TensorPtr Tape::softmax_masked(const TensorPtr& logits, const BoolMatrix& allowed) {
    require_rank2(logits, "softmax_masked");
    const int rows = logits->shape[0];
    const int cols = logits->shape[1];
    if (allowed.rows != rows || allowed.cols != cols) {
        throw std::invalid_argument("softmax_masked: mask " + std::to_string(allowed.rows) + "x" +
                                    std::to_string(allowed.cols) + " does not match logits " +
                                    shape_str(logits->shape));
    }
    auto out = Tensor::zeros(logits->shape, logits->requires_grad);
    auto mask = std::make_shared<BoolMatrix>(allowed);
    for (int i = 0; i < rows; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < cols; ++j) {
            if (mask->at(i, j)) mx = std::max(mx, logits->data[static_cast<std::size_t>(i) * cols + j]);
        }
        if (!std::isfinite(mx)) continue;  // fully blocked row stays all-zero
        double sum = 0.0;
        for (int j = 0; j < cols; ++j) {
            if (mask->at(i, j)) {
                const double e = std::exp(logits->data[static_cast<std::size_t>(i) * cols + j] - mx);
                out->data[static_cast<std::size_t>(i) * cols + j] = e;
                sum += e;
            }
        }
        for (int j = 0; j < cols; ++j) {
            if (mask->at(i, j)) out->data[static_cast<std::size_t>(i) * cols + j] /= sum;
        }
    }
    if (out->requires_grad) {
        record([logits, out, mask, rows, cols]() {
            logits->ensure_grad();
            for (int i = 0; i < rows; ++i) {
                double dot = 0.0;
                for (int j = 0; j < cols; ++j) {
                    const std::size_t k = static_cast<std::size_t>(i) * cols + j;
                    if (mask->at(i, j)) dot += out->grad[k] * out->data[k];
                }
                for (int j = 0; j < cols; ++j) {
                    const std::size_t k = static_cast<std::size_t>(i) * cols + j;
                    if (mask->at(i, j)) {
                        logits->grad[k] += out->data[k] * (out->grad[k] - dot);
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr Tape::bce_masked(const TensorPtr& probs, const std::vector<double>& labels,
                           const std::vector<std::uint8_t>& mask) {
    const std::size_t n = probs->data.size();
    if (labels.size() != n || mask.size() != n) {
        throw std::invalid_argument("bce_masked: probs/labels/mask length mismatch (" +
                                    std::to_string(n) + ", " + std::to_string(labels.size()) +
                                    ", " + std::to_string(mask.size()) + ")");
    }
    std::int64_t count = 0;
    for (std::uint8_t m : mask) count += m ? 1 : 0;
    if (count == 0) throw std::invalid_argument("bce_masked: empty loss mask");

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        const double p = std::clamp(probs->data[i], kBceClampLo, kBceClampHi);
        const double y = labels[i];
        total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    }
    auto out = Tensor::scalar(total / static_cast<double>(count));
    out->requires_grad = probs->requires_grad;
    if (out->requires_grad) {
        out->ensure_grad();
        auto lab = std::make_shared<std::vector<double>>(labels);
        auto msk = std::make_shared<std::vector<std::uint8_t>>(mask);
        record([probs, out, lab, msk, count]() {
            probs->ensure_grad();
            const double g = out->grad[0] / static_cast<double>(count);
            for (std::size_t i = 0; i < probs->data.size(); ++i) {
                if (!(*msk)[i]) continue;
                const double raw = probs->data[i];
                if (raw < kBceClampLo || raw > kBceClampHi) continue;  // clamped: flat
                const double y = (*lab)[i];
                probs->grad[i] += g * (-(y / raw) + (1.0 - y) / (1.0 - raw));
            }
        });
    }
    return out;
}

void Tape::backward(const TensorPtr& loss) {
    if (!loss->is_scalar()) {
        throw std::invalid_argument("backward: loss must be a scalar, got " +
                                    shape_str(loss->shape));
    }
    if (consumed_) {
        throw std::logic_error("backward: record already consumed; re-record the forward pass");
    }
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backprop();
    nodes_.clear();
    consumed_ = true;
}

double gradcheck(const std::function<TensorPtr(Tape&)>& f, const std::vector<TensorPtr>& params,
                 double eps) {
    if (eps <= 0.0) throw std::invalid_argument("gradcheck: eps must be positive");
    for (const auto& p : params) {
        if (!p->requires_grad) {
            throw std::invalid_argument("gradcheck: parameter '" + p->name +
                                        "' does not require grad");
        }
        p->zero_grad();
    }
    Tape tape;
    TensorPtr loss = f(tape);
    if (!loss->is_scalar()) throw std::invalid_argument("gradcheck: f must return a scalar");
    if (!std::isfinite(loss->data[0])) throw std::runtime_error("gradcheck: non-finite loss");
    tape.backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) {
        p->ensure_grad();
        analytic.push_back(p->grad);
    }

    double max_err = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = *params[pi];
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            const double saved = p.data[i];
            p.data[i] = saved + eps;
            Tape t1;
            const double up = f(t1)->data[0];
            p.data[i] = saved - eps;
            Tape t2;
            const double down = f(t2)->data[0];
            p.data[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw std::runtime_error("gradcheck: non-finite value at parameter '" + p.name +
                                         "'");
            }
            const double numeric = (up - down) / (2.0 * eps);
            const double err =
                std::abs(analytic[pi][i] - numeric) / std::max(1.0, std::abs(numeric));
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

}  // namespace kt
