#include "kt/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "kt/config_io.hpp"
#include "kt/rng.hpp"

namespace kt {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr char kMagic[4] = {'R', 'K', 'T', '1'};

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Dropout stream ids, one per site so masks never collide across layers.
enum DropSite : std::uint64_t {
    kDropA = 1,
    kDropB = 2,
    kDropC = 3,
    kDropD = 4,
    kDropE = 5,
    kDropAttn = 6,
};

std::map<std::string, std::vector<int>> param_shapes(const ModelConfig& c) {
    std::map<std::string, std::vector<int>> shapes;
    const int d = c.d_model;
    const int dh = c.head_dim();
    auto mlp = [&](const std::string& prefix, int in, int hidden, int out) {
        shapes[prefix + ".w1"] = {in, hidden};
        shapes[prefix + ".b1"] = {hidden};
        shapes[prefix + ".w2"] = {hidden, out};
        shapes[prefix + ".b2"] = {out};
    };
    shapes["embed"] = {c.n_content, c.embed_dim};
    const int q0_width = c.embed_dim + c.query_width;
    mlp("mlp_a", q0_width, c.hidden(0), d);
    mlp("mlp_b", d + c.memory_width, c.hidden(1), d);
    mlp("mlp_c", d + q0_width + c.hand_width, c.hidden(2), d);
    mlp("mlp_d", d + c.memory_width, c.hidden(3), d);
    mlp("mlp_e", 2 * d, c.hidden(4), 1);
    for (const char* g : {"i", "f", "g", "o"}) {
        shapes[std::string("lstm.wx_") + g] = {d, d};
        shapes[std::string("lstm.wh_") + g] = {d, d};
        shapes[std::string("lstm.b_") + g] = {d};
    }
    for (int h = 0; h < c.n_heads; ++h) {
        const std::string p = "attn.h" + std::to_string(h);
        shapes[p + ".wq"] = {d, dh};
        shapes[p + ".wk"] = {d, dh};
        shapes[p + ".wv"] = {d, dh};
        shapes[p + ".wo"] = {dh, d};
    }
    return shapes;
}

TensorPtr mlp_apply(Tape& tape, const ModelParams& params, const std::string& prefix,
                    const TensorPtr& x, const ModelConfig& config, bool train, std::uint64_t key,
                    std::uint64_t site) {
    auto h = tape.relu(tape.add(tape.matmul(x, params.at(prefix + ".w1")), params.at(prefix + ".b1")));
    h = tape.dropout(h, config.dropout_rate, train, rng::mix(key, site));
    return tape.add(tape.matmul(h, params.at(prefix + ".w2")), params.at(prefix + ".b2"));
}

// Batch-major in, batch-major out. Runs time-major internally and permutes
// back with a row gather.
TensorPtr lstm_apply(Tape& tape, const ModelParams& params, const TensorPtr& x, int batch,
                     int len, int d) {
    TensorPtr h_prev = Tensor::zeros({batch, d});
    TensorPtr c_prev = Tensor::zeros({batch, d});
    std::vector<TensorPtr> steps;
    steps.reserve(len);
    for (int t = 0; t < len; ++t) {
        std::vector<int> idx(batch);
        for (int b = 0; b < batch; ++b) idx[b] = b * len + t;
        auto xt = tape.row_gather(x, std::move(idx));
        auto gate = [&](const char* g) {
            return tape.add(tape.add(tape.matmul(xt, params.at(std::string("lstm.wx_") + g)),
                                     tape.matmul(h_prev, params.at(std::string("lstm.wh_") + g))),
                            params.at(std::string("lstm.b_") + g));
        };
        auto i = tape.sigmoid(gate("i"));
        auto f = tape.sigmoid(gate("f"));
        auto g = tape.tanh(gate("g"));
        auto o = tape.sigmoid(gate("o"));
        auto c = tape.add(tape.mul(f, c_prev), tape.mul(i, g));
        auto h = tape.mul(o, tape.tanh(c));
        steps.push_back(h);
        h_prev = h;
        c_prev = c;
    }
    auto time_major = len == 1 ? steps[0] : tape.concat(steps, 0);
    std::vector<int> perm(static_cast<std::size_t>(batch) * len);
    for (int b = 0; b < batch; ++b)
        for (int t = 0; t < len; ++t) perm[static_cast<std::size_t>(b) * len + t] = t * batch + b;
    return tape.row_gather(time_major, std::move(perm));
}

void write_u32_le(std::ostream& out, std::uint32_t x) {
    unsigned char b[4] = {static_cast<unsigned char>(x & 0xff),
                          static_cast<unsigned char>((x >> 8) & 0xff),
                          static_cast<unsigned char>((x >> 16) & 0xff),
                          static_cast<unsigned char>((x >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw CheckpointError(std::string("truncated checkpoint (") + what + ")");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_doubles_le(std::ostream& out, const std::vector<double>& xs) {
    static_assert(sizeof(double) == 8);
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(xs.data()),
                  static_cast<std::streamsize>(xs.size() * 8));
    } else {
        for (double x : xs) {
            auto bits = std::bit_cast<std::uint64_t>(x);
            unsigned char b[8];
            for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
            out.write(reinterpret_cast<const char*>(b), 8);
        }
    }
}

void read_doubles_le(std::istream& in, std::vector<double>& xs, const std::string& name) {
    if constexpr (std::endian::native == std::endian::little) {
        in.read(reinterpret_cast<char*>(xs.data()), static_cast<std::streamsize>(xs.size() * 8));
    } else {
        for (double& x : xs) {
            unsigned char b[8];
            in.read(reinterpret_cast<char*>(b), 8);
            if (!in) break;
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
            x = std::bit_cast<double>(bits);
        }
    }
    if (!in)
        throw CheckpointError("truncated checkpoint while reading tensor '" + name + "'");
}

std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

}  // namespace

void ModelConfig::validate() const {
    if (d_model <= 0) throw std::invalid_argument("d_model must be positive");
    if (n_heads <= 0) throw std::invalid_argument("n_heads must be positive");
    if (d_model % n_heads != 0)
        throw std::invalid_argument("d_model " + std::to_string(d_model) +
                                    " not divisible by n_heads " + std::to_string(n_heads));
    if (seq_len <= 0) throw std::invalid_argument("seq_len must be positive");
    if (embed_dim <= 0) throw std::invalid_argument("embed_dim must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw std::invalid_argument("dropout_rate must lie in [0, 1)");
    if (mask_window < 0) throw std::invalid_argument("mask_window must be non-negative");
    if (query_width <= 0 || memory_width <= 0 || hand_width <= 0)
        throw std::invalid_argument("feature widths must be bound before building the model");
    if (n_content <= 0) throw std::invalid_argument("n_content must be positive");
}

const TensorPtr& ModelParams::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::out_of_range("no parameter named '" + name + "'");
    return it->second;
}

std::vector<TensorPtr> ModelParams::all() const {
    std::vector<TensorPtr> out;
    out.reserve(tensors.size());
    for (const auto& [name, t] : tensors) out.push_back(t);
    return out;
}

ModelParams init_params(const ModelConfig& config) {
    config.validate();
    ModelParams params;
    for (const auto& [name, shape] : param_shapes(config)) {
        auto t = Tensor::zeros(shape, true);
        t->name = name;
        if (shape.size() == 2) {
            // Weights: uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), seeded per
            // tensor by name so the values don't depend on iteration order.
            const double bound = 1.0 / std::sqrt(static_cast<double>(shape[0]));
            rng::Stream stream(rng::mix(config.init_seed, fnv1a64(name)));
            for (double& x : t->data) x = stream.uniform(-bound, bound);
        }
        // Biases stay zero.
        params.tensors.emplace(name, std::move(t));
    }
    return params;
}

ModelParams clone_params(const ModelParams& params) {
    ModelParams out;
    for (const auto& [name, t] : params.tensors) {
        auto copy = Tensor::from(t->shape, t->data, t->requires_grad);
        copy->name = t->name;
        out.tensors.emplace(name, std::move(copy));
    }
    return out;
}

void ModelBatch::validate(const ModelConfig& config) const {
    const std::size_t n = flat_size();
    if (batch <= 0 || window_len <= 0) throw std::invalid_argument("empty batch");
    if (window_len > config.seq_len)
        throw std::invalid_argument("window_len " + std::to_string(window_len) +
                                    " exceeds seq_len " + std::to_string(config.seq_len));
    if (content_index.size() != n) throw std::invalid_argument("content_index size mismatch");
    auto check = [&](const Matrix& m, int width, const char* what) {
        if (m.rows != static_cast<int>(n) || m.cols != width)
            throw std::invalid_argument(std::string(what) + " matrix shape mismatch");
    };
    check(query, config.query_width, "query");
    check(memory, config.memory_width, "memory");
    check(hand, config.hand_width, "hand");
    if (shift_index.size() != n) throw std::invalid_argument("shift_index size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (content_index[i] < -1 || content_index[i] >= config.n_content)
            throw std::invalid_argument("content_index out of range at position " +
                                        std::to_string(i));
        if (shift_index[i] < -1 || shift_index[i] >= static_cast<int>(n))
            throw std::invalid_argument("shift_index out of range at position " +
                                        std::to_string(i));
    }
    if (allowed.size() != static_cast<std::size_t>(batch))
        throw std::invalid_argument("one allowed matrix per batch element required");
    for (const auto& m : allowed)
        if (m.rows != window_len || m.cols != window_len)
            throw std::invalid_argument("allowed matrix must be window_len x window_len");
    if (labels.size() != n || loss_mask.size() != n)
        throw std::invalid_argument("labels / loss_mask size mismatch");
}

TensorPtr model_forward(Tape& tape, const ModelParams& params, const ModelConfig& config,
                        const ModelBatch& batch, bool train, std::uint64_t dropout_key) {
    config.validate();
    batch.validate(config);
    const int B = batch.batch;
    const int L = batch.window_len;
    const int BL = B * L;

    auto query_t = Tensor::from({BL, config.query_width}, batch.query.v);
    auto memory_t = Tensor::from({BL, config.memory_width}, batch.memory.v);

    auto embed_rows = tape.row_gather(params.at("embed"), batch.content_index);
    auto q0 = tape.concat({embed_rows, query_t}, 1);
    auto x1 = mlp_apply(tape, params, "mlp_a", q0, config, train, dropout_key, kDropA);
    auto x2 = mlp_apply(tape, params, "mlp_b", tape.concat({x1, memory_t}, 1), config, train,
                        dropout_key, kDropB);
    auto hidden = lstm_apply(tape, params, x2, B, L, config.d_model);
    auto hidden_shifted = tape.row_gather(hidden, batch.shift_index);

    // Hand-crafted aggregates enter through the same one-run-back gather, so
    // position i never sees aggregates that include its own container. They
    // carry no gradient, so the gather runs outside the tape.
    Matrix hand_shifted(BL, config.hand_width);
    for (int i = 0; i < BL; ++i) {
        const int src = batch.shift_index[i];
        if (src >= 0)
            std::memcpy(hand_shifted.row(i), batch.hand.row(src),
                        sizeof(double) * static_cast<std::size_t>(config.hand_width));
    }
    auto hand_t = Tensor::from({BL, config.hand_width}, std::move(hand_shifted.v));

    auto qt = mlp_apply(tape, params, "mlp_c", tape.concat({hidden_shifted, q0, hand_t}, 1),
                        config, train, dropout_key, kDropC);
    auto kv = mlp_apply(tape, params, "mlp_d", tape.concat({qt, memory_t}, 1), config, train,
                        dropout_key, kDropD);

    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(config.head_dim()));
    std::vector<TensorPtr> per_element;
    per_element.reserve(B);
    for (int b = 0; b < B; ++b) {
        std::vector<int> rows(L);
        std::iota(rows.begin(), rows.end(), b * L);
        auto qb = tape.row_gather(qt, rows);
        auto kb = tape.row_gather(kv, rows);
        TensorPtr summed;
        for (int h = 0; h < config.n_heads; ++h) {
            const std::string p = "attn.h" + std::to_string(h);
            auto qh = tape.matmul(qb, params.at(p + ".wq"));
            auto kh = tape.matmul(kb, params.at(p + ".wk"));
            auto vh = tape.matmul(kb, params.at(p + ".wv"));
            auto scores = tape.scale(tape.matmul(qh, kh, false, true), inv_sqrt_dh);
            auto weights = tape.softmax_masked(scores, batch.allowed[b]);
            auto context = tape.matmul(weights, vh);
            auto out = tape.matmul(context, params.at(p + ".wo"));
            summed = summed ? tape.add(summed, out) : out;
        }
        per_element.push_back(summed);
    }
    auto attended = B == 1 ? per_element[0] : tape.concat(per_element, 0);
    attended = tape.dropout(attended, config.dropout_rate, train, rng::mix(dropout_key, kDropAttn));

    auto head_in = tape.concat({attended, qt}, 1);
    return tape.sigmoid(mlp_apply(tape, params, "mlp_e", head_in, config, train, dropout_key,
                                  kDropE));
}

TensorPtr model_loss(Tape& tape, const ModelParams& params, const ModelConfig& config,
                     const ModelBatch& batch, bool train, std::uint64_t dropout_key) {
    bool any = false;
    for (auto m : batch.loss_mask) any = any || m != 0;
    if (!any) throw std::invalid_argument("batch has no question positions to score");
    auto probs = model_forward(tape, params, config, batch, train, dropout_key);
    return tape.bce_masked(probs, batch.labels, batch.loss_mask);
}

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const ModelConfig& model_config, const FeatureConfig& feature_config,
                     const std::string& run_manifest_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open '" + path + "' for writing");

    nlohmann::json manifest;
    manifest["model_config"] = model_config;
    manifest["feature_config"] = feature_config;
    manifest["run_manifest_hash"] = run_manifest_hash;
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& [name, t] : params.tensors)
        tensors.push_back({{"name", name}, {"shape", t->shape}, {"dtype", "f8"}});
    manifest["tensors"] = std::move(tensors);
    const std::string text = manifest.dump();

    out.write(kMagic, 4);
    write_u32_le(out, kCheckpointVersion);
    write_u32_le(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : params.tensors) write_doubles_le(out, t->data);
    if (!out) throw CheckpointError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open '" + path + "'");

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError("bad magic: '" + path + "' is not a checkpoint file");
    const std::uint32_t version = read_u32_le(in, "version");
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                              " (expected " + std::to_string(kCheckpointVersion) + ")");
    const std::uint32_t manifest_len = read_u32_le(in, "manifest length");
    std::string text(manifest_len, '\0');
    in.read(text.data(), manifest_len);
    if (!in) throw CheckpointError("truncated checkpoint (manifest)");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("corrupt checkpoint manifest: ") + e.what());
    }

    Checkpoint ckpt;
    try {
        ckpt.model_config = manifest.at("model_config").get<ModelConfig>();
        ckpt.feature_config = manifest.at("feature_config").get<FeatureConfig>();
        ckpt.run_manifest_hash = manifest.value("run_manifest_hash", "");
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("corrupt checkpoint manifest: ") + e.what());
    }

    const auto expected = param_shapes(ckpt.model_config);
    std::size_t seen = 0;
    for (const auto& entry : manifest.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<int>>();
        auto it = expected.find(name);
        if (it == expected.end())
            throw CheckpointError("unexpected tensor '" + name + "' in checkpoint");
        if (it->second != shape)
            throw CheckpointError("tensor '" + name + "' shape mismatch: checkpoint has " +
                                  shape_str(shape) + ", config expects " + shape_str(it->second));
        std::size_t count = 1;
        for (int d : shape) count *= static_cast<std::size_t>(d);
        std::vector<double> data(count);
        read_doubles_le(in, data, name);
        auto t = Tensor::from(shape, std::move(data), true);
        t->name = name;
        ckpt.params.tensors.emplace(name, std::move(t));
        ++seen;
    }
    if (seen != expected.size())
        throw CheckpointError("checkpoint lists " + std::to_string(seen) +
                              " tensors, config expects " + std::to_string(expected.size()));
    return ckpt;
}

}  // namespace kt
