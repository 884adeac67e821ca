#include "dclnas/autodiff.hpp"

#include <cmath>
#include <limits>

#include "dclnas/error.hpp"

namespace dclnas::ad {

namespace {

void accumulate(std::vector<Mat>& adj, int id, const Mat& g) {
    Mat& slot = adj[static_cast<std::size_t>(id)];
    if (slot.size() == 0) {
        slot = g;
    } else {
        slot += g;
    }
}

void check_shape(bool ok, const char* op) {
    if (!ok) throw StructuralError(std::string("autodiff: shape mismatch in ") + op);
}

}  // namespace

Var Tape::push(Mat value, BackFn back) {
    nodes_.push_back(Node{std::move(value), -1, std::move(back)});
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Mat value) { return push(std::move(value), nullptr); }

Var Tape::param(const Mat& value, int slot) {
    Var v = push(value, nullptr);
    nodes_.back().param_slot = slot;
    return v;
}

Var Tape::matmul(Var a, Var b) {
    check_shape(value(a).cols() == value(b).rows(), "matmul");
    return push(value(a) * value(b), [a, b](const Tape& t, const Mat& g, std::vector<Mat>& adj) {
        accumulate(adj, a.id, g * t.value(b).transpose());
        accumulate(adj, b.id, t.value(a).transpose() * g);
    });
}

Var Tape::matmul_nt(Var a, Var b) {
    check_shape(value(a).cols() == value(b).cols(), "matmul_nt");
    return push(value(a) * value(b).transpose(), [a, b](const Tape& t, const Mat& g, std::vector<Mat>& adj) {
        accumulate(adj, a.id, g * t.value(b));
        accumulate(adj, b.id, g.transpose() * t.value(a));
    });
}

Var Tape::add(Var a, Var b) {
    check_shape(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add");
    return push(value(a) + value(b), [a, b](const Tape&, const Mat& g, std::vector<Mat>& adj) {
        accumulate(adj, a.id, g);
        accumulate(adj, b.id, g);
    });
}

Var Tape::add_row(Var a, Var row) {
    check_shape(value(row).rows() == 1 && value(row).cols() == value(a).cols(), "add_row");
    Mat out = value(a).rowwise() + value(row).row(0);
    return push(std::move(out), [a, row](const Tape&, const Mat& g, std::vector<Mat>& adj) {
        accumulate(adj, a.id, g);
        accumulate(adj, row.id, g.colwise().sum());
    });
}

Var Tape::scale(Var a, double s) {
    return push(value(a) * s, [a, s](const Tape&, const Mat& g, std::vector<Mat>& adj) { accumulate(adj, a.id, g * s); });
}

Var Tape::scale_by_one_plus(Var a, Var s) {
    check_shape(value(s).size() == 1, "scale_by_one_plus");
    const double f = 1.0 + value(s)(0, 0);
    return push(value(a) * f, [a, s, f](const Tape& t, const Mat& g, std::vector<Mat>& adj) {
        accumulate(adj, a.id, g * f);
        Mat gs(1, 1);
        gs(0, 0) = g.cwiseProduct(t.value(a)).sum();
        accumulate(adj, s.id, gs);
    });
}

Var Tape::relu(Var a) {
    return push(value(a).cwiseMax(0.0), [a](const Tape& t, const Mat& g, std::vector<Mat>& adj) {
        accumulate(adj, a.id, (t.value(a).array() > 0.0).select(g, 0.0));
    });
}

Var Tape::tanh(Var a) {
    Var out = push(value(a).array().tanh().matrix(), nullptr);
    const int oid = out.id;
    nodes_.back().back = [a, oid](const Tape& t, const Mat& g, std::vector<Mat>& adj) {
        const auto& y = t.nodes_[static_cast<std::size_t>(oid)].value;
        accumulate(adj, a.id, (g.array() * (1.0 - y.array().square())).matrix());
    };
    return out;
}

Var Tape::sigmoid(Var a) {
    Mat y = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
    Var out = push(std::move(y), nullptr);
    const int oid = out.id;
    nodes_.back().back = [a, oid](const Tape& t, const Mat& g, std::vector<Mat>& adj) {
        const auto& y = t.nodes_[static_cast<std::size_t>(oid)].value;
        accumulate(adj, a.id, (g.array() * y.array() * (1.0 - y.array())).matrix());
    };
    return out;
}

Var Tape::concat_cols(Var a, Var b) {
    check_shape(value(a).rows() == value(b).rows(), "concat_cols");
    Mat out(value(a).rows(), value(a).cols() + value(b).cols());
    out << value(a), value(b);
    const auto ca = value(a).cols();
    const auto cb = value(b).cols();
    return push(std::move(out), [a, b, ca, cb](const Tape&, const Mat& g, std::vector<Mat>& adj) {
        accumulate(adj, a.id, g.leftCols(ca));
        accumulate(adj, b.id, g.rightCols(cb));
    });
}

Var Tape::gather_rows(Var table, std::vector<int> rows) {
    const Mat& tv = value(table);
    Mat out(static_cast<Eigen::Index>(rows.size()), tv.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        check_shape(rows[i] >= 0 && rows[i] < tv.rows(), "gather_rows");
        out.row(static_cast<Eigen::Index>(i)) = tv.row(rows[i]);
    }
    const auto nrows = tv.rows();
    return push(std::move(out), [table, rows = std::move(rows), nrows](const Tape&, const Mat& g, std::vector<Mat>& adj) {
        Mat gt = Mat::Zero(nrows, g.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) gt.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
        accumulate(adj, table.id, gt);
    });
}

Var Tape::spmm(std::shared_ptr<const SpMat> s, Var x) {
    check_shape(s->cols() == value(x).rows(), "spmm");
    Mat out = (*s) * value(x);
    return push(std::move(out), [s = std::move(s), x](const Tape&, const Mat& g, std::vector<Mat>& adj) {
        accumulate(adj, x.id, s->transpose() * g);
    });
}

Var Tape::row_dot(Var a, Var b) {
    check_shape(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "row_dot");
    Mat out = value(a).cwiseProduct(value(b)).rowwise().sum();
    return push(std::move(out), [a, b](const Tape& t, const Mat& g, std::vector<Mat>& adj) {
        accumulate(adj, a.id, t.value(b).array().colwise() * g.col(0).array());
        accumulate(adj, b.id, t.value(a).array().colwise() * g.col(0).array());
    });
}

Var Tape::scale_rows(Var a, Var w) {
    check_shape(value(w).cols() == 1 && value(w).rows() == value(a).rows(), "scale_rows");
    Mat out = value(a).array().colwise() * value(w).col(0).array();
    return push(std::move(out), [a, w](const Tape& t, const Mat& g, std::vector<Mat>& adj) {
        accumulate(adj, a.id, g.array().colwise() * t.value(w).col(0).array());
        accumulate(adj, w.id, g.cwiseProduct(t.value(a)).rowwise().sum());
    });
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
    const Mat& xv = value(x);
    const auto n = xv.cols();
    check_shape(value(gamma).rows() == 1 && value(gamma).cols() == n && value(beta).cols() == n, "layer_norm");
    Eigen::VectorXd mean = xv.rowwise().mean();
    Mat xc = xv.colwise() - mean;
    Eigen::VectorXd inv_std =
        ((xc.array().square().rowwise().sum() / static_cast<double>(n)) + eps).sqrt().inverse().matrix();
    Mat xhat = xc.array().colwise() * inv_std.array();
    Mat out = (xhat.array().rowwise() * value(gamma).row(0).array()).matrix();
    out.rowwise() += value(beta).row(0);
    return push(std::move(out), [x, gamma, beta, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                                    const Tape& t, const Mat& g, std::vector<Mat>& adj) {
        accumulate(adj, gamma.id, g.cwiseProduct(xhat).colwise().sum());
        accumulate(adj, beta.id, g.colwise().sum());
        Mat dxhat = g.array().rowwise() * t.value(gamma).row(0).array();
        Eigen::VectorXd s1 = dxhat.rowwise().sum();
        Eigen::VectorXd s2 = dxhat.cwiseProduct(xhat).rowwise().sum();
        const double nd = static_cast<double>(n);
        Mat dx = (nd * dxhat.array()).matrix();
        dx.colwise() -= s1;
        dx -= (xhat.array().colwise() * s2.array()).matrix();
        dx = (dx.array().colwise() * (inv_std.array() / nd)).matrix();
        accumulate(adj, x.id, dx);
    });
}

Var Tape::segment_attention(Var q, Var k, Var v, int seg, int heads, std::vector<std::uint8_t> key_mask) {
    const Mat& qv = value(q);
    const Mat& kv = value(k);
    const Mat& vv = value(v);
    check_shape(qv.rows() == kv.rows() && kv.rows() == vv.rows() && qv.cols() == kv.cols() && kv.cols() == vv.cols(),
                "segment_attention");
    check_shape(seg > 0 && qv.rows() % seg == 0 && heads > 0 && qv.cols() % heads == 0, "segment_attention");
    check_shape(key_mask.size() == static_cast<std::size_t>(qv.rows()), "segment_attention mask");
    const int segments = static_cast<int>(qv.rows()) / seg;
    const int dh = static_cast<int>(qv.cols()) / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(segments) * heads * seg * seg, 0.0);
    Mat out = Mat::Zero(qv.rows(), qv.cols());
    std::vector<double> row(static_cast<std::size_t>(seg));
    for (int s = 0; s < segments; ++s) {
        const int r0 = s * seg;
        for (int h = 0; h < heads; ++h) {
            const int c0 = h * dh;
            double* p = probs->data() + (static_cast<std::size_t>(s) * heads + h) * seg * seg;
            for (int i = 0; i < seg; ++i) {
                double mx = -std::numeric_limits<double>::infinity();
                for (int j = 0; j < seg; ++j) {
                    if (!key_mask[static_cast<std::size_t>(r0 + j)]) continue;
                    const double sc = qv.row(r0 + i).segment(c0, dh).dot(kv.row(r0 + j).segment(c0, dh)) * inv_sqrt;
                    row[static_cast<std::size_t>(j)] = sc;
                    mx = std::max(mx, sc);
                }
                if (!std::isfinite(mx)) continue;  // no live key in this segment
                double z = 0.0;
                for (int j = 0; j < seg; ++j) {
                    if (!key_mask[static_cast<std::size_t>(r0 + j)]) continue;
                    const double e = std::exp(row[static_cast<std::size_t>(j)] - mx);
                    p[i * seg + j] = e;
                    z += e;
                }
                for (int j = 0; j < seg; ++j) {
                    p[i * seg + j] /= z;
                    if (p[i * seg + j] != 0.0) out.row(r0 + i).segment(c0, dh) += p[i * seg + j] * vv.row(r0 + j).segment(c0, dh);
                }
            }
        }
    }
    last_attention_ = *probs;
    return push(std::move(out), [q, k, v, seg, heads, dh, segments, inv_sqrt, probs](const Tape& t, const Mat& g,
                                                                                    std::vector<Mat>& adj) {
        const Mat& qv = t.value(q);
        const Mat& kv = t.value(k);
        const Mat& vv = t.value(v);
        Mat gq = Mat::Zero(qv.rows(), qv.cols());
        Mat gk = Mat::Zero(kv.rows(), kv.cols());
        Mat gv = Mat::Zero(vv.rows(), vv.cols());
        std::vector<double> dp(static_cast<std::size_t>(seg));
        for (int s = 0; s < segments; ++s) {
            const int r0 = s * seg;
            for (int h = 0; h < heads; ++h) {
                const int c0 = h * dh;
                const double* p = probs->data() + (static_cast<std::size_t>(s) * heads + h) * seg * seg;
                for (int i = 0; i < seg; ++i) {
                    const auto gi = g.row(r0 + i).segment(c0, dh);
                    double dot = 0.0;
                    for (int j = 0; j < seg; ++j) {
                        const double pij = p[i * seg + j];
                        if (pij == 0.0) {
                            dp[static_cast<std::size_t>(j)] = 0.0;
                            continue;
                        }
                        dp[static_cast<std::size_t>(j)] = gi.dot(vv.row(r0 + j).segment(c0, dh));
                        dot += dp[static_cast<std::size_t>(j)] * pij;
                        gv.row(r0 + j).segment(c0, dh) += pij * gi;
                    }
                    for (int j = 0; j < seg; ++j) {
                        const double pij = p[i * seg + j];
                        if (pij == 0.0) continue;
                        const double ds = pij * (dp[static_cast<std::size_t>(j)] - dot) * inv_sqrt;
                        gq.row(r0 + i).segment(c0, dh) += ds * kv.row(r0 + j).segment(c0, dh);
                        gk.row(r0 + j).segment(c0, dh) += ds * qv.row(r0 + i).segment(c0, dh);
                    }
                }
            }
        }
        accumulate(adj, q.id, gq);
        accumulate(adj, k.id, gk);
        accumulate(adj, v.id, gv);
    });
}

void Tape::backward(Var out, const Mat& adjoint, Grads& grads) const {
    if (!out.valid() || out.id >= static_cast<int>(nodes_.size()))
        throw StateError("backward called without a recorded forward pass");
    const Mat& ov = value(out);
    if (adjoint.rows() != ov.rows() || adjoint.cols() != ov.cols())
        throw StructuralError("backward: adjoint shape does not match the output");
    std::vector<Mat> adj(nodes_.size());
    adj[static_cast<std::size_t>(out.id)] = adjoint;
    for (int id = out.id; id >= 0; --id) {
        const auto& node = nodes_[static_cast<std::size_t>(id)];
        Mat& a = adj[static_cast<std::size_t>(id)];
        if (a.size() == 0) continue;
        if (node.param_slot >= 0) {
            Mat& g = grads.at(static_cast<std::size_t>(node.param_slot));
            if (g.size() == 0) {
                g = a;
            } else {
                g += a;
            }
        } else if (node.back) {
            node.back(*this, a, adj);
        }
        a.resize(0, 0);  // release early; not needed again
    }
}

}  // namespace dclnas::ad
