#include "dclnas/nn.hpp"

#include <algorithm>
#include <cmath>

#include "dclnas/error.hpp"
#include "dclnas/rng.hpp"
#include "json_io.hpp"

namespace dclnas {

using ad::Mat;
using ad::SpMat;
using ad::Tape;
using ad::Var;

namespace {

constexpr const char* kCheckpointFormat = "dclnas-predictor";
constexpr int kCheckpointVersion = 1;

}  // namespace

ModelDims default_dims(const SearchSpace& space, const PathTable& table) {
    ModelDims d;
    d.num_ops = space.num_ops();
    d.l_seq = space.l_seq();
    d.table_rows = static_cast<int>(table.size()) + 1;
    return d;
}

void check_dims(const ModelDims& d) {
    std::vector<std::string> problems;
    auto need = [&](bool ok, const char* msg) {
        if (!ok) problems.emplace_back(msg);
    };
    need(d.num_ops >= 1, "num_ops must be >= 1");
    need(d.gin_dim >= 1, "gin_dim must be >= 1");
    need(d.gin_layers >= 1, "gin_layers must be >= 1");
    need(d.d >= 1, "d must be >= 1");
    need(d.d == d.d_fm, "d must equal d_fm (the pooled node embedding is FM_n)");
    need(d.d_e >= 1, "d_e must be >= 1");
    need(d.heads >= 1 && d.d_e % std::max(1, d.heads) == 0, "heads must divide d_e");
    need(d.ff_mult >= 1, "ff_mult must be >= 1");
    need(d.l_seq >= 1, "l_seq must be >= 1");
    need(d.table_rows >= 2, "table_rows must be >= 2");
    need(d.head_hidden >= 1, "head_hidden must be >= 1");
    if (!problems.empty()) {
        std::string msg = "invalid model dimensions:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
}

void PredictorModel::add(std::string name, int rows, int cols) {
    names_.push_back(std::move(name));
    params_.emplace_back(Mat::Zero(rows, cols));
}

PredictorModel::PredictorModel(ModelDims dims, std::uint64_t seed) : dims_(dims), seed_(seed) {
    check_dims(dims_);
    const auto& d = dims_;
    int in = d.node_features();
    for (int m = 0; m < d.gin_layers; ++m) {
        const std::string p = "gin." + std::to_string(m) + ".";
        add(p + "eps", 1, 1);
        add(p + "w1", d.gin_dim, in);
        add(p + "b1", 1, d.gin_dim);
        add(p + "w2", d.gin_dim, d.gin_dim);
        add(p + "b2", 1, d.gin_dim);
        in = d.gin_dim;
    }
    add("lift.w", d.d, d.gin_dim);
    add("lift.b", 1, d.d);
    add("context.w", d.d, d.d);
    add("path.table", d.table_rows, d.d_e);
    for (const char* qkv : {"attn.q", "attn.k", "attn.v", "attn.o"}) {
        add(std::string(qkv) + ".w", d.d_e, d.d_e);
        add(std::string(qkv) + ".b", 1, d.d_e);
    }
    add("ln1.gamma", 1, d.d_e);
    add("ln1.beta", 1, d.d_e);
    add("ff.w1", d.ff_mult * d.d_e, d.d_e);
    add("ff.b1", 1, d.ff_mult * d.d_e);
    add("ff.w2", d.d_e, d.ff_mult * d.d_e);
    add("ff.b2", 1, d.d_e);
    add("ln2.gamma", 1, d.d_e);
    add("ln2.beta", 1, d.d_e);
    add("path.proj.w", d.d_fm, d.d_e);
    add("path.proj.b", 1, d.d_fm);
    encoder_end_ = static_cast<int>(params_.size());
    add("head.project.w", d.head_hidden, d.soft_length());
    add("head.project.b", 1, d.head_hidden);
    add("head.full.w", d.head_hidden, d.head_hidden);
    add("head.full.b", 1, d.head_hidden);
    add("head.score.w", 1, d.head_hidden);
    add("head.score.b", 1, 1);

    // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); a bias uses its weight's fan-in.
    int fan_in = 1;
    for (std::size_t s = 0; s < params_.size(); ++s) {
        const auto& name = names_[s];
        Mat& p = params_[s];
        Rng rng = make_rng(derive_seed(seed, {0x5EED, s}));
        if (name.ends_with(".eps") || name.ends_with(".beta")) continue;
        if (name.ends_with(".gamma")) {
            p.setOnes();
            continue;
        }
        double bound = 1.0;
        if (name == "path.table") {
            bound = 1.0;
        } else if (name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2")) {
            bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        } else {
            fan_in = static_cast<int>(p.cols());
            bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        }
        for (Eigen::Index r = 0; r < p.rows(); ++r)
            for (Eigen::Index c = 0; c < p.cols(); ++c) p(r, c) = (2.0 * uniform01(rng) - 1.0) * bound;
    }
}

int PredictorModel::slot(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return static_cast<int>(i);
    throw LookupError("no model parameter named '" + std::string(name) + "'");
}

ad::Grads PredictorModel::zero_grads() const {
    ad::Grads g;
    g.reserve(params_.size());
    for (const auto& p : params_) g.emplace_back(Mat::Zero(p.rows(), p.cols()));
    return g;
}

std::size_t PredictorModel::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.size());
    return n;
}

bool PredictorModel::all_finite() const {
    return std::all_of(params_.begin(), params_.end(), [](const Mat& p) { return p.allFinite(); });
}

std::string PredictorModel::to_json() const {
    io::ojson j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    j["seed"] = seed_;
    const auto& d = dims_;
    j["dims"] = {{"num_ops", d.num_ops},   {"gin_dim", d.gin_dim},       {"gin_layers", d.gin_layers},
                 {"d", d.d},               {"d_e", d.d_e},               {"heads", d.heads},
                 {"ff_mult", d.ff_mult},   {"d_fm", d.d_fm},             {"l_seq", d.l_seq},
                 {"table_rows", d.table_rows}, {"head_hidden", d.head_hidden}};
    io::ojson ps = io::ojson::array();
    for (std::size_t s = 0; s < params_.size(); ++s) {
        const Mat& p = params_[s];
        std::vector<double> data;
        data.reserve(static_cast<std::size_t>(p.size()));
        for (Eigen::Index r = 0; r < p.rows(); ++r)
            for (Eigen::Index c = 0; c < p.cols(); ++c) data.push_back(p(r, c));
        ps.push_back({{"name", names_[s]}, {"rows", p.rows()}, {"cols", p.cols()}, {"data", std::move(data)}});
    }
    j["params"] = std::move(ps);
    return j.dump() + "\n";
}

PredictorModel PredictorModel::from_json(std::string_view text) {
    const auto j = io::parse(text, "model checkpoint");
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat) throw IoError("not a predictor checkpoint");
        if (j.at("version").get<int>() != kCheckpointVersion)
            throw IoError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
        const auto& jd = j.at("dims");
        ModelDims d;
        d.num_ops = jd.at("num_ops");
        d.gin_dim = jd.at("gin_dim");
        d.gin_layers = jd.at("gin_layers");
        d.d = jd.at("d");
        d.d_e = jd.at("d_e");
        d.heads = jd.at("heads");
        d.ff_mult = jd.at("ff_mult");
        d.d_fm = jd.at("d_fm");
        d.l_seq = jd.at("l_seq");
        d.table_rows = jd.at("table_rows");
        d.head_hidden = jd.at("head_hidden");
        PredictorModel m(d, j.at("seed").get<std::uint64_t>());
        const auto& ps = j.at("params");
        if (ps.size() != m.params_.size()) throw IoError("checkpoint parameter count does not match its dims");
        for (std::size_t s = 0; s < ps.size(); ++s) {
            const auto& e = ps[s];
            Mat& p = m.params_[s];
            if (e.at("name").get<std::string>() != m.names_[s] || e.at("rows").get<Eigen::Index>() != p.rows() ||
                e.at("cols").get<Eigen::Index>() != p.cols())
                throw IoError("checkpoint parameter " + std::to_string(s) + " does not match '" + m.names_[s] + "'");
            const auto& data = e.at("data");
            if (data.size() != static_cast<std::size_t>(p.size()))
                throw IoError("checkpoint parameter '" + m.names_[s] + "' has the wrong element count");
            std::size_t i = 0;
            for (Eigen::Index r = 0; r < p.rows(); ++r)
                for (Eigen::Index c = 0; c < p.cols(); ++c) p(r, c) = data[i++].get<double>();
        }
        return m;
    } catch (const io::json::exception& e) {
        throw IoError(std::string("model checkpoint: ") + e.what());
    }
}

void PredictorModel::save(const std::filesystem::path& path) const { io::write_file(path, to_json()); }

PredictorModel PredictorModel::load(const std::filesystem::path& path) { return from_json(io::read_file(path)); }

std::vector<int> token_rows(const std::vector<PathId>& ids, const PathTable& table) {
    std::vector<int> rows;
    rows.reserve(ids.size());
    for (PathId id : ids) rows.push_back(static_cast<int>(table.token_index(id)));
    return rows;
}

EncodedArch prepare(const Architecture& arch, const SearchSpace& space, const PathTable& table) {
    EncodedArch e;
    const int k = space.num_ops();
    e.features.reserve(static_cast<std::size_t>(arch.num_nodes()));
    for (int op : arch.ops()) e.features.push_back(op == kInputOp ? k : op == kOutputOp ? k + 1 : op);
    e.adjacency = arch.adjacency();
    e.token_rows = token_rows(path_id_sequence(arch, space, table), table);
    return e;
}

namespace {

struct Params {
    const PredictorModel& m;
    Tape& t;
    Var operator()(const char* name) const {
        const int s = m.slot(name);
        return t.param(m.param(s), s);
    }
    Var operator()(const std::string& name) const { return (*this)(name.c_str()); }
};

Var linear(Tape& t, const Params& p, Var x, const std::string& prefix) {
    return t.add_row(t.matmul_nt(x, p(prefix + ".w")), p(prefix + ".b"));
}

struct NodeBranch {
    Var gin_out, lifted, attention, fm_n;
};

NodeBranch node_branch(const PredictorModel& model, Tape& t, const std::vector<EncodedArch>& batch) {
    const auto& d = model.dims();
    const Params p{model, t};
    std::vector<int> offset;
    int total = 0;
    for (const auto& a : batch) {
        offset.push_back(total);
        total += static_cast<int>(a.features.size());
    }
    const auto nb = static_cast<Eigen::Index>(batch.size());
    Mat x0 = Mat::Zero(total, d.node_features());
    std::vector<Eigen::Triplet<double>> adj, mean, expand, sum;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& a = batch[b];
        const int n = static_cast<int>(a.features.size());
        const int o = offset[b];
        if (a.adjacency.size() != static_cast<std::size_t>(n * n))
            throw StructuralError("encoded architecture adjacency is not n x n");
        for (int v = 0; v < n; ++v) {
            const int f = a.features[static_cast<std::size_t>(v)];
            if (f < 0 || f >= d.node_features()) throw StructuralError("node feature index out of range");
            x0(o + v, f) = 1.0;
            mean.emplace_back(static_cast<int>(b), o + v, 1.0 / n);
            expand.emplace_back(o + v, static_cast<int>(b), 1.0);
            sum.emplace_back(static_cast<int>(b), o + v, 1.0);
            for (int u = 0; u < n; ++u) {
                // Neighbourhood is undirected: predecessors and successors.
                if (a.adjacency[static_cast<std::size_t>(v * n + u)] || a.adjacency[static_cast<std::size_t>(u * n + v)])
                    adj.emplace_back(o + v, o + u, 1.0);
            }
        }
    }
    auto build = [](Eigen::Index r, Eigen::Index c, const std::vector<Eigen::Triplet<double>>& tr) {
        auto s = std::make_shared<SpMat>(r, c);
        s->setFromTriplets(tr.begin(), tr.end());
        return std::shared_ptr<const SpMat>(std::move(s));
    };
    const auto s_adj = build(total, total, adj);
    const auto s_mean = build(nb, total, mean);
    const auto s_expand = build(total, nb, expand);
    const auto s_sum = build(nb, total, sum);

    Var h = t.constant(std::move(x0));
    for (int m = 0; m < d.gin_layers; ++m) {
        const std::string pre = "gin." + std::to_string(m) + ".";
        Var agg = t.add(t.scale_by_one_plus(h, p(pre + "eps")), t.spmm(s_adj, h));
        Var hid = t.relu(t.add_row(t.matmul_nt(agg, p(pre + "w1")), p(pre + "b1")));
        h = t.add_row(t.matmul_nt(hid, p(pre + "w2")), p(pre + "b2"));
    }
    NodeBranch out;
    out.gin_out = h;
    out.lifted = linear(t, p, h, "lift");
    Var ctx = t.tanh(t.matmul_nt(t.spmm(s_mean, out.lifted), p("context.w")));
    out.attention = t.sigmoid(t.row_dot(out.lifted, t.spmm(s_expand, ctx)));
    out.fm_n = t.spmm(s_sum, t.scale_rows(out.lifted, out.attention));
    return out;
}

Var path_branch(const PredictorModel& model, Tape& t, const std::vector<std::vector<int>>& rows_per_arch) {
    const auto& d = model.dims();
    const Params p{model, t};
    const int pad_row = d.table_rows - 1;
    const int l = d.l_seq;
    std::vector<int> rows;
    std::vector<std::uint8_t> live;
    std::vector<Eigen::Triplet<double>> pool;
    rows.reserve(rows_per_arch.size() * static_cast<std::size_t>(l));
    for (std::size_t b = 0; b < rows_per_arch.size(); ++b) {
        const auto& r = rows_per_arch[b];
        if (r.size() != static_cast<std::size_t>(l)) throw StructuralError("path token sequence length != L_seq");
        int count = 0;
        for (int x : r) count += x != pad_row;
        for (int i = 0; i < l; ++i) {
            const int x = r[static_cast<std::size_t>(i)];
            if (x < 0 || x > pad_row) throw LookupError("path token row out of range");
            rows.push_back(x);
            live.push_back(x != pad_row);
            if (x != pad_row) pool.emplace_back(static_cast<int>(b), static_cast<int>(b) * l + i, 1.0 / count);
        }
    }
    auto s_pool = std::make_shared<SpMat>(static_cast<Eigen::Index>(rows_per_arch.size()),
                                          static_cast<Eigen::Index>(rows.size()));
    s_pool->setFromTriplets(pool.begin(), pool.end());

    Var x = t.gather_rows(p("path.table"), std::move(rows));
    Var q = linear(t, p, x, "attn.q");
    Var k = linear(t, p, x, "attn.k");
    Var v = linear(t, p, x, "attn.v");
    Var att = t.segment_attention(q, k, v, l, d.heads, std::move(live));
    Var x1 = t.layer_norm(t.add(x, linear(t, p, att, "attn.o")), p("ln1.gamma"), p("ln1.beta"));
    Var ff = t.add_row(t.matmul_nt(t.relu(t.add_row(t.matmul_nt(x1, p("ff.w1")), p("ff.b1"))), p("ff.w2")),
                       p("ff.b2"));
    Var x2 = t.layer_norm(t.add(x1, ff), p("ln2.gamma"), p("ln2.beta"));
    Var pooled = t.spmm(std::shared_ptr<const SpMat>(std::move(s_pool)), x2);
    return linear(t, p, pooled, "path.proj");
}

}  // namespace

ForwardPass forward(const PredictorModel& model, const std::vector<EncodedArch>& batch) {
    if (batch.empty()) throw ParameterError("forward: empty batch");
    ForwardPass fp;
    Tape& t = fp.tape_;
    fp.batch_ = batch.size();
    const auto nodes = node_branch(model, t, batch);
    std::vector<std::vector<int>> rows;
    rows.reserve(batch.size());
    for (const auto& a : batch) rows.push_back(a.token_rows);
    fp.gin_out_ = nodes.gin_out;
    fp.lifted_ = nodes.lifted;
    fp.node_att_ = nodes.attention;
    fp.fm_n_ = nodes.fm_n;
    fp.fm_p_ = path_branch(model, t, rows);
    fp.soft_ = t.concat_cols(fp.fm_n_, fp.fm_p_);
    const Params p{model, t};
    Var h1 = t.relu(linear(t, p, fp.soft_, "head.project"));
    fp.hidden_ = t.relu(linear(t, p, h1, "head.full"));
    fp.logit_ = linear(t, p, fp.hidden_, "head.score");
    fp.score_ = t.sigmoid(fp.logit_);
    return fp;
}

void ForwardPass::backward_soft(const Mat& adjoint, ad::Grads& grads) const {
    if (empty()) throw StateError("backward without a forward pass");
    tape_.backward(soft_, adjoint, grads);
}

void ForwardPass::backward_scores(const Mat& adjoint, ad::Grads& grads) const {
    if (empty()) throw StateError("backward without a forward pass");
    tape_.backward(score_, adjoint, grads);
}

Mat gin_forward(const PredictorModel& model, const EncodedArch& arch) {
    Tape t;
    const auto nodes = node_branch(model, t, {arch});
    return t.value(nodes.gin_out);
}

Eigen::VectorXd node_attention_pool(const PredictorModel& model, const Mat& h) {
    if (h.rows() < 1) throw ParameterError("node_attention_pool: no nodes");
    const Eigen::VectorXd mean = h.colwise().mean().transpose();
    const Eigen::VectorXd c = (model.param("context.w") * mean).array().tanh().matrix();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(h.cols());
    for (Eigen::Index v = 0; v < h.rows(); ++v) {
        const double a = 1.0 / (1.0 + std::exp(-h.row(v).dot(c)));
        out += a * h.row(v).transpose();
    }
    return out;
}

Eigen::VectorXd path_attention_forward(const PredictorModel& model, const std::vector<PathId>& ids,
                                       const PathTable& table) {
    if (ids.size() != static_cast<std::size_t>(model.dims().l_seq))
        throw StructuralError("path id sequence length != L_seq");
    Tape t;
    Var fm = path_branch(model, t, {token_rows(ids, table)});
    return t.value(fm).row(0).transpose();
}

Eigen::VectorXd forward_embedding(const PredictorModel& model, const Architecture& arch, const SearchSpace& space,
                                  const PathTable& table) {
    const auto fp = forward(model, {prepare(arch, space, table)});
    return fp.soft_encoding().row(0).transpose();
}

double forward_score(const PredictorModel& model, const Architecture& arch, const SearchSpace& space,
                     const PathTable& table) {
    const auto fp = forward(model, {prepare(arch, space, table)});
    return fp.scores()(0, 0);
}

Eigen::VectorXd score_batch(const PredictorModel& model, const std::vector<EncodedArch>& archs, std::size_t chunk) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(archs.size()));
    chunk = std::max<std::size_t>(1, chunk);
    for (std::size_t s = 0; s < archs.size(); s += chunk) {
        const std::size_t e = std::min(archs.size(), s + chunk);
        std::vector<EncodedArch> part(archs.begin() + static_cast<std::ptrdiff_t>(s),
                                      archs.begin() + static_cast<std::ptrdiff_t>(e));
        const auto fp = forward(model, part);
        out.segment(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(e - s)) = fp.scores().col(0);
    }
    return out;
}

}  // namespace dclnas
