#include "recpo/policy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "recpo/rng.hpp"

namespace recpo {

namespace {

constexpr double kNormEps = 1e-12;

struct ForwardState {
    std::vector<double> coeff;   // per history step: eta^(cut-pos) * (1 + gain*(s-3))
    std::vector<double> c_raw;   // unnormalized context
    std::vector<double> c;       // normalized context
    double norm = 0.0;
    std::vector<double> logits;
    std::vector<double> logp;
    std::vector<double> prob;
};

ForwardState run_forward(const PolicyParams& params, const std::vector<HistoryStep>& history,
                         int cut) {
    if (history.empty()) throw std::invalid_argument("forward_logprobs: empty history");
    const int v = params.vocab_size;
    const int d = params.dim;

    ForwardState st;
    st.coeff.resize(history.size());
    st.c_raw.assign(d, 0.0);
    for (std::size_t k = 0; k < history.size(); ++k) {
        const HistoryStep& h = history[k];
        if (h.item_index < 0 || h.item_index >= v)
            throw std::invalid_argument("forward_logprobs: history item outside vocabulary");
        if (h.position > cut)
            throw std::invalid_argument("forward_logprobs: history position beyond cut");
        const double q = std::pow(params.recency_decay, cut - h.position) *
                         (1.0 + params.score_gain * (h.score - 3.0));
        st.coeff[k] = q;
        const double* e = params.embeddings.data() + static_cast<std::size_t>(h.item_index) * d;
        for (int j = 0; j < d; ++j) st.c_raw[j] += q * e[j];
    }

    double n2 = 0.0;
    for (const double x : st.c_raw) n2 += x * x;
    st.norm = std::sqrt(n2);
    st.c = st.c_raw;
    if (st.norm > kNormEps)
        for (double& x : st.c) x /= st.norm;

    st.logits.resize(v);
    double zmax = -1e300;
    for (int i = 0; i < v; ++i) {
        const double* e = params.embeddings.data() + static_cast<std::size_t>(i) * d;
        double z = params.bias[i];
        for (int j = 0; j < d; ++j) z += st.c[j] * e[j];
        st.logits[i] = z;
        if (z > zmax) zmax = z;
    }
    double sum = 0.0;
    for (int i = 0; i < v; ++i) sum += std::exp(st.logits[i] - zmax);
    const double lse = zmax + std::log(sum);
    st.logp.resize(v);
    st.prob.resize(v);
    for (int i = 0; i < v; ++i) {
        st.logp[i] = st.logits[i] - lse;
        st.prob[i] = std::exp(st.logp[i]);
    }
    return st;
}

void write_u64(std::ofstream& out, std::uint64_t x) {
    out.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

void write_f64(std::ofstream& out, double x) {
    out.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

std::uint64_t read_u64(std::ifstream& in) {
    std::uint64_t x = 0;
    in.read(reinterpret_cast<char*>(&x), sizeof(x));
    return x;
}

double read_f64(std::ifstream& in) {
    double x = 0;
    in.read(reinterpret_cast<char*>(&x), sizeof(x));
    return x;
}

}  // namespace

PolicyParams init_policy(int vocab_size, const PolicyConfig& cfg, std::uint64_t seed) {
    if (vocab_size < 1) throw std::invalid_argument("init_policy: empty vocabulary");
    if (cfg.dim < 2) throw std::invalid_argument("init_policy: dim must be >= 2");
    PolicyParams p;
    p.vocab_size = vocab_size;
    p.dim = cfg.dim;
    p.embeddings.resize(static_cast<std::size_t>(vocab_size) * cfg.dim);
    p.bias.assign(vocab_size, 0.0);
    p.recency_decay = cfg.recency_decay;
    p.score_gain = cfg.score_gain;
    Rng rng = stream_rng(seed, StreamTag::Init, 0, 0);
    for (double& x : p.embeddings) x = (2.0 * rng.uniform01() - 1.0) * cfg.init_range;
    check_policy(p);
    return p;
}

void check_policy(const PolicyParams& params) {
    if (params.dim < 2) throw std::invalid_argument("policy: dim must be >= 2");
    if (params.vocab_size < 1) throw std::invalid_argument("policy: empty vocabulary");
    if (params.embeddings.size() !=
        static_cast<std::size_t>(params.vocab_size) * params.dim)
        throw std::invalid_argument("policy: embedding shape mismatch");
    if (params.bias.size() != static_cast<std::size_t>(params.vocab_size))
        throw std::invalid_argument("policy: bias shape mismatch");
    if (!(params.recency_decay > 0.0 && params.recency_decay <= 1.0))
        throw std::invalid_argument("policy: recency_decay must lie in (0,1]");
    for (const double x : params.embeddings)
        if (!std::isfinite(x)) throw std::invalid_argument("policy: non-finite embedding");
    for (const double x : params.bias)
        if (!std::isfinite(x)) throw std::invalid_argument("policy: non-finite bias");
    if (!std::isfinite(params.score_gain))
        throw std::invalid_argument("policy: non-finite score_gain");
}

LogProbTable forward_logprobs(const PolicyParams& params, const std::vector<HistoryStep>& history,
                              int cut) {
    ForwardState st = run_forward(params, history, cut);
    LogProbTable t;
    t.logp = std::move(st.logp);
    return t;
}

PolicyGrad PolicyGrad::zeros(int vocab_size, int dim) {
    PolicyGrad g;
    g.embeddings.assign(static_cast<std::size_t>(vocab_size) * dim, 0.0);
    g.bias.assign(vocab_size, 0.0);
    return g;
}

LogProbTable accumulate_weighted_grad(const PolicyParams& params,
                                      const std::vector<HistoryStep>& history, int cut,
                                      const std::vector<std::pair<int, double>>& weights,
                                      PolicyGrad& grad) {
    ForwardState st = run_forward(params, history, cut);
    const int v = params.vocab_size;
    const int d = params.dim;

    // L = sum_i w_i * logp_i; dL/dz_j = w_j - (sum_i w_i) * p_j.
    double wsum = 0.0;
    for (const auto& [idx, w] : weights) {
        if (idx < 0 || idx >= v)
            throw std::invalid_argument("accumulate_weighted_grad: index outside vocabulary");
        wsum += w;
    }
    std::vector<double> dz(v);
    for (int i = 0; i < v; ++i) dz[i] = -wsum * st.prob[i];
    for (const auto& [idx, w] : weights) dz[idx] += w;

    std::vector<double> dc(d, 0.0);
    for (int i = 0; i < v; ++i) {
        const double g = dz[i];
        grad.bias[i] += g;
        const double* e = params.embeddings.data() + static_cast<std::size_t>(i) * d;
        double* ge = grad.embeddings.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) {
            dc[j] += g * e[j];
            ge[j] += g * st.c[j];  // output path: dz_i/de_i = c
        }
    }

    // Back through the L2 normalization (identity when the raw norm is ~0).
    std::vector<double> dc_raw(d);
    if (st.norm > kNormEps) {
        double proj = 0.0;
        for (int j = 0; j < d; ++j) proj += st.c[j] * dc[j];
        for (int j = 0; j < d; ++j) dc_raw[j] = (dc[j] - st.c[j] * proj) / st.norm;
    } else {
        dc_raw = dc;
    }

    for (std::size_t k = 0; k < history.size(); ++k) {
        const HistoryStep& h = history[k];
        const double* e = params.embeddings.data() + static_cast<std::size_t>(h.item_index) * d;
        double* ge = grad.embeddings.data() + static_cast<std::size_t>(h.item_index) * d;
        double edot = 0.0;
        for (int j = 0; j < d; ++j) {
            ge[j] += st.coeff[k] * dc_raw[j];
            edot += e[j] * dc_raw[j];
        }
        const int age = cut - h.position;
        const double score_term = 1.0 + params.score_gain * (h.score - 3.0);
        if (age > 0)
            grad.recency_decay +=
                age * std::pow(params.recency_decay, age - 1) * score_term * edot;
        grad.score_gain += std::pow(params.recency_decay, age) * (h.score - 3.0) * edot;
    }

    LogProbTable table;
    table.logp = std::move(st.logp);
    return table;
}

SftResult sft_loss_grad(const PolicyParams& params, const std::vector<HistoryStep>& history,
                        int cut, int target_index) {
    if (target_index < 0 || target_index >= params.vocab_size)
        throw std::invalid_argument("sft_loss_grad: target outside vocabulary");
    SftResult out;
    out.grad = PolicyGrad::zeros(params.vocab_size, params.dim);
    const LogProbTable table =
        accumulate_weighted_grad(params, history, cut, {{target_index, -1.0}}, out.grad);
    out.loss = -table.logp[target_index];
    return out;
}

PolicyParams snapshot_reference(const PolicyParams& params) { return params; }

void save_policy(const std::string& path, const PolicyParams& params, const ItemVocab& vocab) {
    check_policy(params);
    if (vocab.size() != params.vocab_size)
        throw std::invalid_argument("save_policy: vocab size disagrees with params");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_policy: cannot open " + path);
    out.write("RECPOPOL", 8);
    write_u64(out, 1);  // format version
    write_u64(out, static_cast<std::uint64_t>(params.vocab_size));
    write_u64(out, static_cast<std::uint64_t>(params.dim));
    write_f64(out, params.recency_decay);
    write_f64(out, params.score_gain);
    for (const double x : params.bias) write_f64(out, x);
    for (const double x : params.embeddings) write_f64(out, x);
    for (const std::int64_t id : vocab.ids)
        write_u64(out, static_cast<std::uint64_t>(id));
    if (!out) throw std::runtime_error("save_policy: write failed for " + path);
}

std::pair<PolicyParams, ItemVocab> load_policy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_policy: cannot open " + path);
    char magic[8] = {};
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "RECPOPOL", 8) != 0)
        throw std::runtime_error("load_policy: bad magic in " + path);
    const std::uint64_t version = read_u64(in);
    if (version != 1)
        throw std::runtime_error("load_policy: unsupported version in " + path);
    PolicyParams p;
    p.vocab_size = static_cast<int>(read_u64(in));
    p.dim = static_cast<int>(read_u64(in));
    if (p.vocab_size < 1 || p.vocab_size > (1 << 26) || p.dim < 2 || p.dim > (1 << 16))
        throw std::runtime_error("load_policy: implausible shape in " + path);
    p.recency_decay = read_f64(in);
    p.score_gain = read_f64(in);
    p.bias.resize(p.vocab_size);
    for (double& x : p.bias) x = read_f64(in);
    p.embeddings.resize(static_cast<std::size_t>(p.vocab_size) * p.dim);
    for (double& x : p.embeddings) x = read_f64(in);
    std::vector<std::int64_t> ids(p.vocab_size);
    for (std::int64_t& id : ids) id = static_cast<std::int64_t>(read_u64(in));
    if (!in) throw std::runtime_error("load_policy: truncated file " + path);
    check_policy(p);
    return {std::move(p), ItemVocab::from_ids(std::move(ids))};
}

}  // namespace recpo
