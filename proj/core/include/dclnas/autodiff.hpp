#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace dclnas::ad {

using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Handle to a value recorded on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Gradients for a flat parameter list, indexed like the model parameters.
using Grads = std::vector<Mat>;

// Define-by-run reverse-mode tape over dense double matrices. Values are
// computed eagerly; backward() replays the recorded ops in reverse.
class Tape {
public:
    Var constant(Mat value);
    // Leaf bound to parameter `slot`; its gradient is added to grads[slot].
    Var param(const Mat& value, int slot);

    const Mat& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
    std::size_t size() const { return nodes_.size(); }

    Var matmul(Var a, Var b);     // a * b
    Var matmul_nt(Var a, Var b);  // a * b^T
    Var add(Var a, Var b);
    Var add_row(Var a, Var row);  // row (1 x c) broadcast over a's rows
    Var scale(Var a, double s);
    Var scale_by_one_plus(Var a, Var s);  // a * (1 + s), s is 1 x 1
    Var relu(Var a);
    Var tanh(Var a);
    Var sigmoid(Var a);
    Var concat_cols(Var a, Var b);
    Var gather_rows(Var table, std::vector<int> rows);
    Var spmm(std::shared_ptr<const SpMat> s, Var x);  // constant s times x
    Var row_dot(Var a, Var b);                        // n x 1 of row-wise dot products
    Var scale_rows(Var a, Var w);                     // row i of a times w(i, 0)
    Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
    // Scaled dot-product attention within consecutive segments of `seg`
    // rows, split into `heads` column groups. Keys with mask == 0 receive no
    // weight; a row whose segment has no live key yields zeros.
    Var segment_attention(Var q, Var k, Var v, int seg, int heads, std::vector<std::uint8_t> key_mask);

    // Attention probabilities of the most recent segment_attention call,
    // laid out as [segment][head][query][key].
    const std::vector<double>& last_attention() const { return last_attention_; }

    // Reverse sweep from `out` seeded with `adjoint`; parameter gradients are
    // accumulated into `grads`. Does not modify the tape, so it can be
    // repeated.
    void backward(Var out, const Mat& adjoint, Grads& grads) const;

private:
    struct Node {
        Mat value;
        int param_slot = -1;
        // Receives the node's adjoint and the adjoint table; adds into inputs.
        std::function<void(const Tape&, const Mat&, std::vector<Mat>&)> back;
    };
    using BackFn = std::function<void(const Tape&, const Mat&, std::vector<Mat>&)>;
    Var push(Mat value, BackFn back);

    std::vector<Node> nodes_;
    std::vector<double> last_attention_;
};

}  // namespace dclnas::ad
