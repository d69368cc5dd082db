#include "flowsense/tape.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "flowsense/errors.hpp"
#include "flowsense/kernels.hpp"

namespace flowsense::neural {

namespace {

const kernels::Backend& be() { return kernels::active_backend(); }

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

}  // namespace

Tape::NodeId Tape::emit(Tensor value, bool needs_grad,
                        std::function<void()> backprop, const char* op_name) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite output of op ") + op_name);
  }
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs_grad;
  node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor* Tape::grad_sink(NodeId id) {
  return nodes_[id].needs_grad ? &nodes_[id].grad : nullptr;
}

const Tensor& Tape::grad(NodeId id) const {
  require(nodes_[id].needs_grad, "gradient requested for a constant node");
  require(nodes_[id].grad.size() > 0, "backward() has not run over this node");
  return nodes_[id].grad;
}

Tape::NodeId Tape::input(Tensor value, bool needs_grad) {
  return emit(std::move(value), needs_grad, nullptr, "input");
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  require(av.cols() == bv.rows(), "matmul shape mismatch: " + av.shape_str() +
                                      " @ " + bv.shape_str());
  const int m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out({m, n});
  be().gemm_nn(m, n, k, av.data(), bv.data(), out.data(), false);
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "matmul");
  if (ng) {
    nodes_[id].backprop = [this, a, b, id, m, n, k]() {
      const Tensor& dy = nodes_[id].grad;
      if (Tensor* da = grad_sink(a)) {
        Tensor bt = transpose(nodes_[b].value);  // [n x k]
        be().gemm_nn(m, k, n, dy.data(), bt.data(), da->data(), true);
      }
      if (Tensor* db = grad_sink(b)) {
        Tensor at = transpose(nodes_[a].value);  // [k x m]
        be().gemm_nn(k, n, m, at.data(), dy.data(), db->data(), true);
      }
    };
  }
  return id;
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  require(av.same_shape(bv), "add shape mismatch: " + av.shape_str() + " vs " +
                                 bv.shape_str());
  Tensor out(av.shape());
  be().add(static_cast<int>(av.size()), av.data(), bv.data(), out.data());
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "add");
  if (ng) {
    nodes_[id].backprop = [this, a, b, id]() {
      const Tensor& dy = nodes_[id].grad;
      const int n = static_cast<int>(dy.size());
      if (Tensor* da = grad_sink(a)) be().axpy(n, 1.0, dy.data(), da->data());
      if (Tensor* db = grad_sink(b)) be().axpy(n, 1.0, dy.data(), db->data());
    };
  }
  return id;
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  require(av.same_shape(bv), "sub shape mismatch: " + av.shape_str() + " vs " +
                                 bv.shape_str());
  Tensor out(av.shape());
  be().sub(static_cast<int>(av.size()), av.data(), bv.data(), out.data());
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "sub");
  if (ng) {
    nodes_[id].backprop = [this, a, b, id]() {
      const Tensor& dy = nodes_[id].grad;
      const int n = static_cast<int>(dy.size());
      if (Tensor* da = grad_sink(a)) be().axpy(n, 1.0, dy.data(), da->data());
      if (Tensor* db = grad_sink(b)) be().axpy(n, -1.0, dy.data(), db->data());
    };
  }
  return id;
}

Tape::NodeId Tape::add_rowvec(NodeId m, NodeId v) {
  const Tensor& mv = nodes_[m].value;
  const Tensor& vv = nodes_[v].value;
  require(vv.rows() == 1 && vv.cols() == mv.cols(),
          "add_rowvec shape mismatch: " + mv.shape_str() + " vs " +
              vv.shape_str());
  const int rows = mv.rows(), cols = mv.cols();
  Tensor out(mv.shape());
  for (int r = 0; r < rows; ++r) {
    be().add(cols, mv.data() + static_cast<size_t>(r) * cols, vv.data(),
             out.data() + static_cast<size_t>(r) * cols);
  }
  const bool ng = nodes_[m].needs_grad || nodes_[v].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "add_rowvec");
  if (ng) {
    nodes_[id].backprop = [this, m, v, id, rows, cols]() {
      const Tensor& dy = nodes_[id].grad;
      if (Tensor* dm = grad_sink(m)) {
        be().axpy(static_cast<int>(dy.size()), 1.0, dy.data(), dm->data());
      }
      if (Tensor* dv = grad_sink(v)) {
        for (int r = 0; r < rows; ++r) {
          be().axpy(cols, 1.0, dy.data() + static_cast<size_t>(r) * cols,
                    dv->data());
        }
      }
    };
  }
  return id;
}

Tape::NodeId Tape::mul_rowvec(NodeId m, NodeId v) {
  const Tensor& mv = nodes_[m].value;
  const Tensor& vv = nodes_[v].value;
  require(vv.rows() == 1 && vv.cols() == mv.cols(),
          "mul_rowvec shape mismatch: " + mv.shape_str() + " vs " +
              vv.shape_str());
  const int rows = mv.rows(), cols = mv.cols();
  Tensor out(mv.shape());
  for (int r = 0; r < rows; ++r) {
    be().mul(cols, mv.data() + static_cast<size_t>(r) * cols, vv.data(),
             out.data() + static_cast<size_t>(r) * cols);
  }
  const bool ng = nodes_[m].needs_grad || nodes_[v].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "mul_rowvec");
  if (ng) {
    nodes_[id].backprop = [this, m, v, id, rows, cols]() {
      const Tensor& dy = nodes_[id].grad;
      const Tensor& mval = nodes_[m].value;
      const Tensor& vval = nodes_[v].value;
      if (Tensor* dm = grad_sink(m)) {
        for (int r = 0; r < rows; ++r) {
          const size_t off = static_cast<size_t>(r) * cols;
          for (int c = 0; c < cols; ++c) {
            dm->data()[off + c] += dy.data()[off + c] * vval.data()[c];
          }
        }
      }
      if (Tensor* dv = grad_sink(v)) {
        for (int r = 0; r < rows; ++r) {
          const size_t off = static_cast<size_t>(r) * cols;
          for (int c = 0; c < cols; ++c) {
            dv->data()[c] += dy.data()[off + c] * mval.data()[off + c];
          }
        }
      }
    };
  }
  return id;
}

Tape::NodeId Tape::scale(NodeId x, double alpha) {
  const Tensor& xv = nodes_[x].value;
  Tensor out(xv.shape());
  be().scale(static_cast<int>(xv.size()), alpha, xv.data(), out.data());
  const bool ng = nodes_[x].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "scale");
  if (ng) {
    nodes_[id].backprop = [this, x, id, alpha]() {
      const Tensor& dy = nodes_[id].grad;
      if (Tensor* dx = grad_sink(x)) {
        be().axpy(static_cast<int>(dy.size()), alpha, dy.data(), dx->data());
      }
    };
  }
  return id;
}

Tape::NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
  require(!parts.empty(), "concat_cols needs at least one part");
  const int rows = nodes_[parts[0]].value.rows();
  int total_cols = 0;
  bool ng = false;
  for (NodeId p : parts) {
    require(nodes_[p].value.rows() == rows,
            "concat_cols row mismatch: " + nodes_[parts[0]].value.shape_str() +
                " vs " + nodes_[p].value.shape_str());
    total_cols += nodes_[p].value.cols();
    ng = ng || nodes_[p].needs_grad;
  }
  Tensor out({rows, total_cols});
  int col_off = 0;
  for (NodeId p : parts) {
    const Tensor& pv = nodes_[p].value;
    const int pc = pv.cols();
    for (int r = 0; r < rows; ++r) {
      std::memcpy(out.data() + static_cast<size_t>(r) * total_cols + col_off,
                  pv.data() + static_cast<size_t>(r) * pc,
                  static_cast<size_t>(pc) * sizeof(double));
    }
    col_off += pc;
  }
  NodeId id = emit(std::move(out), ng, nullptr, "concat_cols");
  if (ng) {
    std::vector<NodeId> parts_copy = parts;
    nodes_[id].backprop = [this, parts_copy, id, rows, total_cols]() {
      const Tensor& dy = nodes_[id].grad;
      int off = 0;
      for (NodeId p : parts_copy) {
        const int pc = nodes_[p].value.cols();
        if (Tensor* dp = grad_sink(p)) {
          for (int r = 0; r < rows; ++r) {
            be().axpy(pc, 1.0,
                      dy.data() + static_cast<size_t>(r) * total_cols + off,
                      dp->data() + static_cast<size_t>(r) * pc);
          }
        }
        off += pc;
      }
    };
  }
  return id;
}

Tape::NodeId Tape::relu(NodeId x) {
  const Tensor& xv = nodes_[x].value;
  Tensor out(xv.shape());
  be().relu(static_cast<int>(xv.size()), xv.data(), out.data());
  const bool ng = nodes_[x].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "relu");
  if (ng) {
    nodes_[id].backprop = [this, x, id]() {
      const Tensor& dy = nodes_[id].grad;
      if (Tensor* dx = grad_sink(x)) {
        be().relu_backward_acc(static_cast<int>(dy.size()),
                               nodes_[x].value.data(), dy.data(), dx->data());
      }
    };
  }
  return id;
}

Tape::NodeId Tape::tanh(NodeId x) {
  const Tensor& xv = nodes_[x].value;
  Tensor out(xv.shape());
  for (int64_t i = 0; i < xv.size(); ++i) out.at(i) = std::tanh(xv.at(i));
  const bool ng = nodes_[x].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "tanh");
  if (ng) {
    nodes_[id].backprop = [this, x, id]() {
      const Tensor& dy = nodes_[id].grad;
      const Tensor& y = nodes_[id].value;
      if (Tensor* dx = grad_sink(x)) {
        for (int64_t i = 0; i < dy.size(); ++i) {
          dx->at(i) += dy.at(i) * (1.0 - y.at(i) * y.at(i));
        }
      }
    };
  }
  return id;
}

Tape::NodeId Tape::layer_norm(NodeId x) {
  constexpr double kEps = 1e-10;
  const Tensor& xv = nodes_[x].value;
  const int rows = xv.rows(), cols = xv.cols();
  require(cols >= 1, "layer_norm needs at least one column");
  Tensor out(xv.shape());
  std::vector<double> inv_sigma(static_cast<size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const double* xr = xv.data() + static_cast<size_t>(r) * cols;
    double* yr = out.data() + static_cast<size_t>(r) * cols;
    const double mu = be().sum(cols, xr) / cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double d = xr[c] - mu;
      var += d * d;
    }
    var /= cols;
    const double s = 1.0 / std::sqrt(var + kEps);
    inv_sigma[static_cast<size_t>(r)] = s;
    for (int c = 0; c < cols; ++c) yr[c] = (xr[c] - mu) * s;
  }
  const bool ng = nodes_[x].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "layer_norm");
  if (ng) {
    nodes_[id].backprop = [this, x, id, rows, cols,
                           inv_sigma = std::move(inv_sigma)]() {
      const Tensor& dy = nodes_[id].grad;
      const Tensor& y = nodes_[id].value;
      if (Tensor* dx = grad_sink(x)) {
        for (int r = 0; r < rows; ++r) {
          const size_t off = static_cast<size_t>(r) * cols;
          const double* dyr = dy.data() + off;
          const double* yr = y.data() + off;
          const double mean_dy = be().sum(cols, dyr) / cols;
          const double mean_dyy = be().dot(cols, dyr, yr) / cols;
          const double s = inv_sigma[static_cast<size_t>(r)];
          double* dxr = dx->data() + off;
          for (int c = 0; c < cols; ++c) {
            dxr[c] += s * (dyr[c] - mean_dy - yr[c] * mean_dyy);
          }
        }
      }
    };
  }
  return id;
}

Tape::NodeId Tape::softmax(NodeId x) {
  const Tensor& xv = nodes_[x].value;
  const int rows = xv.rows(), cols = xv.cols();
  Tensor out(xv.shape());
  for (int r = 0; r < rows; ++r) {
    const double* xr = xv.data() + static_cast<size_t>(r) * cols;
    double* yr = out.data() + static_cast<size_t>(r) * cols;
    double mx = xr[0];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, xr[c]);
    double z = 0.0;
    for (int c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      z += yr[c];
    }
    for (int c = 0; c < cols; ++c) yr[c] /= z;
  }
  const bool ng = nodes_[x].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "softmax");
  if (ng) {
    nodes_[id].backprop = [this, x, id, rows, cols]() {
      const Tensor& dy = nodes_[id].grad;
      const Tensor& y = nodes_[id].value;
      if (Tensor* dx = grad_sink(x)) {
        for (int r = 0; r < rows; ++r) {
          const size_t off = static_cast<size_t>(r) * cols;
          const double* dyr = dy.data() + off;
          const double* yr = y.data() + off;
          const double inner = be().dot(cols, dyr, yr);
          double* dxr = dx->data() + off;
          for (int c = 0; c < cols; ++c) dxr[c] += yr[c] * (dyr[c] - inner);
        }
      }
    };
  }
  return id;
}

Tape::NodeId Tape::mean_rows(NodeId x) {
  const Tensor& xv = nodes_[x].value;
  const int rows = xv.rows(), cols = xv.cols();
  require(rows >= 1, "mean_rows of an empty tensor");
  Tensor out({1, cols});
  for (int r = 0; r < rows; ++r) {
    be().axpy(cols, 1.0, xv.data() + static_cast<size_t>(r) * cols, out.data());
  }
  be().scale(cols, 1.0 / rows, out.data(), out.data());
  const bool ng = nodes_[x].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "mean_rows");
  if (ng) {
    nodes_[id].backprop = [this, x, id, rows, cols]() {
      const Tensor& dy = nodes_[id].grad;
      if (Tensor* dx = grad_sink(x)) {
        for (int r = 0; r < rows; ++r) {
          be().axpy(cols, 1.0 / rows, dy.data(),
                    dx->data() + static_cast<size_t>(r) * cols);
        }
      }
    };
  }
  return id;
}

Tape::NodeId Tape::sum_all(NodeId x) {
  const Tensor& xv = nodes_[x].value;
  Tensor out = Tensor::scalar(be().sum(static_cast<int>(xv.size()), xv.data()));
  const bool ng = nodes_[x].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "sum_all");
  if (ng) {
    nodes_[id].backprop = [this, x, id]() {
      const double g = nodes_[id].grad.at(0);
      if (Tensor* dx = grad_sink(x)) {
        for (int64_t i = 0; i < dx->size(); ++i) dx->at(i) += g;
      }
    };
  }
  return id;
}

Tape::NodeId Tape::mse(NodeId pred, NodeId target) {
  const Tensor& pv = nodes_[pred].value;
  const Tensor& tv = nodes_[target].value;
  require(pv.same_shape(tv), "mse shape mismatch: " + pv.shape_str() + " vs " +
                                 tv.shape_str());
  require(pv.size() > 0, "mse of empty tensors");
  const int n = static_cast<int>(pv.size());
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = pv.at(i) - tv.at(i);
    acc += d * d;
  }
  Tensor out = Tensor::scalar(acc / n);
  const bool ng = nodes_[pred].needs_grad || nodes_[target].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "mse");
  if (ng) {
    nodes_[id].backprop = [this, pred, target, id, n]() {
      const double g = nodes_[id].grad.at(0) * 2.0 / n;
      const Tensor& pv = nodes_[pred].value;
      const Tensor& tv = nodes_[target].value;
      if (Tensor* dp = grad_sink(pred)) {
        for (int i = 0; i < n; ++i) dp->at(i) += g * (pv.at(i) - tv.at(i));
      }
      if (Tensor* dt = grad_sink(target)) {
        for (int i = 0; i < n; ++i) dt->at(i) -= g * (pv.at(i) - tv.at(i));
      }
    };
  }
  return id;
}

Tape::NodeId Tape::gather_rows(NodeId x, std::vector<int> idx) {
  const Tensor& xv = nodes_[x].value;
  const int rows = xv.rows(), cols = xv.cols();
  for (int i : idx) {
    require(i >= 0 && i < rows, "gather_rows index " + std::to_string(i) +
                                    " out of range for " + xv.shape_str());
  }
  const int out_rows = static_cast<int>(idx.size());
  Tensor out({out_rows, cols});
  for (int r = 0; r < out_rows; ++r) {
    std::memcpy(out.data() + static_cast<size_t>(r) * cols,
                xv.data() + static_cast<size_t>(idx[r]) * cols,
                static_cast<size_t>(cols) * sizeof(double));
  }
  const bool ng = nodes_[x].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "gather_rows");
  if (ng) {
    nodes_[id].backprop = [this, x, id, idx = std::move(idx), cols]() {
      const Tensor& dy = nodes_[id].grad;
      if (Tensor* dx = grad_sink(x)) {
        for (size_t r = 0; r < idx.size(); ++r) {
          be().axpy(cols, 1.0, dy.data() + r * cols,
                    dx->data() + static_cast<size_t>(idx[r]) * cols);
        }
      }
    };
  }
  return id;
}

Tape::NodeId Tape::scatter_sum_rows(NodeId x, std::vector<int> idx,
                                    int out_rows) {
  const Tensor& xv = nodes_[x].value;
  const int rows = xv.rows(), cols = xv.cols();
  require(static_cast<int>(idx.size()) == rows,
          "scatter_sum_rows index count " + std::to_string(idx.size()) +
              " does not match rows of " + xv.shape_str());
  for (int i : idx) {
    require(i >= 0 && i < out_rows, "scatter_sum_rows index " +
                                        std::to_string(i) + " out of range");
  }
  Tensor out({out_rows, cols});
  for (int r = 0; r < rows; ++r) {
    be().axpy(cols, 1.0, xv.data() + static_cast<size_t>(r) * cols,
              out.data() + static_cast<size_t>(idx[r]) * cols);
  }
  const bool ng = nodes_[x].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "scatter_sum_rows");
  if (ng) {
    nodes_[id].backprop = [this, x, id, idx = std::move(idx), cols]() {
      const Tensor& dy = nodes_[id].grad;
      if (Tensor* dx = grad_sink(x)) {
        for (size_t r = 0; r < idx.size(); ++r) {
          be().axpy(cols, 1.0,
                    dy.data() + static_cast<size_t>(idx[r]) * cols,
                    dx->data() + r * cols);
        }
      }
    };
  }
  return id;
}

Tape::NodeId Tape::segment_mean_rows(NodeId x, std::vector<int> seg,
                                     int nseg) {
  const Tensor& xv = nodes_[x].value;
  const int rows = xv.rows(), cols = xv.cols();
  require(static_cast<int>(seg.size()) == rows,
          "segment_mean_rows segment count mismatch");
  std::vector<int> counts(static_cast<size_t>(nseg), 0);
  for (int s : seg) {
    require(s >= 0 && s < nseg, "segment_mean_rows segment out of range");
    counts[static_cast<size_t>(s)]++;
  }
  for (int s = 0; s < nseg; ++s) {
    require(counts[static_cast<size_t>(s)] > 0,
            "segment_mean_rows: empty segment " + std::to_string(s));
  }
  Tensor out({nseg, cols});
  for (int r = 0; r < rows; ++r) {
    be().axpy(cols, 1.0, xv.data() + static_cast<size_t>(r) * cols,
              out.data() + static_cast<size_t>(seg[r]) * cols);
  }
  for (int s = 0; s < nseg; ++s) {
    double* row = out.data() + static_cast<size_t>(s) * cols;
    be().scale(cols, 1.0 / counts[static_cast<size_t>(s)], row, row);
  }
  const bool ng = nodes_[x].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "segment_mean_rows");
  if (ng) {
    nodes_[id].backprop = [this, x, id, seg = std::move(seg),
                           counts = std::move(counts), cols]() {
      const Tensor& dy = nodes_[id].grad;
      if (Tensor* dx = grad_sink(x)) {
        for (size_t r = 0; r < seg.size(); ++r) {
          const int s = seg[r];
          be().axpy(cols, 1.0 / counts[static_cast<size_t>(s)],
                    dy.data() + static_cast<size_t>(s) * cols,
                    dx->data() + r * cols);
        }
      }
    };
  }
  return id;
}

Tape::NodeId Tape::attention(NodeId q, NodeId k, NodeId v, int seq_len,
                             int heads) {
  const Tensor& qv = nodes_[q].value;
  const Tensor& kv = nodes_[k].value;
  const Tensor& vv = nodes_[v].value;
  require(qv.same_shape(kv) && qv.same_shape(vv),
          "attention q/k/v shape mismatch: " + qv.shape_str() + ", " +
              kv.shape_str() + ", " + vv.shape_str());
  const int total_rows = qv.rows();
  const int dm = qv.cols();
  require(seq_len >= 1 && total_rows % seq_len == 0,
          "attention rows not a multiple of seq_len");
  require(heads >= 1 && dm % heads == 0,
          "attention model dim not divisible by head count");
  const int batches = total_rows / seq_len;
  const int dh = dm / heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor out({total_rows, dm});
  // Softmaxed score blocks, kept for backward: [batch][head][i][j].
  std::vector<double> weights(
      static_cast<size_t>(batches) * heads * seq_len * seq_len);

  std::vector<double> scores(static_cast<size_t>(seq_len) * seq_len);
  for (int b = 0; b < batches; ++b) {
    const int row0 = b * seq_len;
    for (int h = 0; h < heads; ++h) {
      const int col0 = h * dh;
      for (int i = 0; i < seq_len; ++i) {
        const double* qi = qv.data() + static_cast<size_t>(row0 + i) * dm + col0;
        for (int j = 0; j < seq_len; ++j) {
          const double* kj =
              kv.data() + static_cast<size_t>(row0 + j) * dm + col0;
          scores[static_cast<size_t>(i) * seq_len + j] =
              att_scale * be().dot(dh, qi, kj);
        }
      }
      double* wblock = weights.data() +
                       (static_cast<size_t>(b) * heads + h) * seq_len * seq_len;
      for (int i = 0; i < seq_len; ++i) {
        double* srow = scores.data() + static_cast<size_t>(i) * seq_len;
        double mx = srow[0];
        for (int j = 1; j < seq_len; ++j) mx = std::max(mx, srow[j]);
        double z = 0.0;
        for (int j = 0; j < seq_len; ++j) {
          srow[j] = std::exp(srow[j] - mx);
          z += srow[j];
        }
        for (int j = 0; j < seq_len; ++j) {
          wblock[static_cast<size_t>(i) * seq_len + j] = srow[j] / z;
        }
      }
      for (int i = 0; i < seq_len; ++i) {
        double* oi = out.data() + static_cast<size_t>(row0 + i) * dm + col0;
        const double* arow = wblock + static_cast<size_t>(i) * seq_len;
        for (int j = 0; j < seq_len; ++j) {
          be().axpy(dh, arow[j],
                    vv.data() + static_cast<size_t>(row0 + j) * dm + col0, oi);
        }
      }
    }
  }

  const bool ng =
      nodes_[q].needs_grad || nodes_[k].needs_grad || nodes_[v].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "attention");
  if (ng) {
    nodes_[id].backprop = [this, q, k, v, id, batches, heads, seq_len, dh, dm,
                           att_scale, weights = std::move(weights)]() {
      const Tensor& dy = nodes_[id].grad;
      const Tensor& qv = nodes_[q].value;
      const Tensor& kv = nodes_[k].value;
      const Tensor& vv = nodes_[v].value;
      Tensor* dq = grad_sink(q);
      Tensor* dk = grad_sink(k);
      Tensor* dv = grad_sink(v);
      std::vector<double> d_att(static_cast<size_t>(seq_len) * seq_len);
      std::vector<double> d_scores(static_cast<size_t>(seq_len) * seq_len);
      for (int b = 0; b < batches; ++b) {
        const int row0 = b * seq_len;
        for (int h = 0; h < heads; ++h) {
          const int col0 = h * dh;
          const double* wblock =
              weights.data() +
              (static_cast<size_t>(b) * heads + h) * seq_len * seq_len;
          // dV and dA
          for (int i = 0; i < seq_len; ++i) {
            const double* doi =
                dy.data() + static_cast<size_t>(row0 + i) * dm + col0;
            const double* arow = wblock + static_cast<size_t>(i) * seq_len;
            for (int j = 0; j < seq_len; ++j) {
              const double* vj =
                  vv.data() + static_cast<size_t>(row0 + j) * dm + col0;
              d_att[static_cast<size_t>(i) * seq_len + j] =
                  be().dot(dh, doi, vj);
              if (dv != nullptr) {
                be().axpy(dh, arow[j], doi,
                          dv->data() + static_cast<size_t>(row0 + j) * dm + col0);
              }
            }
          }
          // softmax backward into raw scores
          for (int i = 0; i < seq_len; ++i) {
            const double* arow = wblock + static_cast<size_t>(i) * seq_len;
            const double* darow = d_att.data() + static_cast<size_t>(i) * seq_len;
            const double inner = be().dot(seq_len, darow, arow);
            double* dsrow = d_scores.data() + static_cast<size_t>(i) * seq_len;
            for (int j = 0; j < seq_len; ++j) {
              dsrow[j] = arow[j] * (darow[j] - inner);
            }
          }
          // dQ and dK
          for (int i = 0; i < seq_len; ++i) {
            const double* dsrow = d_scores.data() + static_cast<size_t>(i) * seq_len;
            const double* qi =
                qv.data() + static_cast<size_t>(row0 + i) * dm + col0;
            for (int j = 0; j < seq_len; ++j) {
              const double g = att_scale * dsrow[j];
              if (dq != nullptr) {
                be().axpy(dh, g,
                          kv.data() + static_cast<size_t>(row0 + j) * dm + col0,
                          dq->data() + static_cast<size_t>(row0 + i) * dm + col0);
              }
              if (dk != nullptr) {
                be().axpy(dh, g, qi,
                          dk->data() + static_cast<size_t>(row0 + j) * dm + col0);
              }
            }
          }
        }
      }
    };
  }
  return id;
}

Tape::NodeId Tape::custom_unary(NodeId x, std::function<double(double)> f,
                                std::function<double(double, double)> df) {
  const Tensor& xv = nodes_[x].value;
  Tensor out(xv.shape());
  for (int64_t i = 0; i < xv.size(); ++i) out.at(i) = f(xv.at(i));
  const bool ng = nodes_[x].needs_grad;
  NodeId id = emit(std::move(out), ng, nullptr, "custom_unary");
  if (ng) {
    nodes_[id].backprop = [this, x, id, df = std::move(df)]() {
      const Tensor& dy = nodes_[id].grad;
      const Tensor& xval = nodes_[x].value;
      const Tensor& yval = nodes_[id].value;
      if (Tensor* dx = grad_sink(x)) {
        for (int64_t i = 0; i < dy.size(); ++i) {
          dx->at(i) += dy.at(i) * df(xval.at(i), yval.at(i));
        }
      }
    };
  }
  return id;
}

void Tape::backward(NodeId loss) {
  require(loss >= 0 && loss < static_cast<NodeId>(nodes_.size()),
          "backward: loss node out of range");
  require(nodes_[loss].value.size() == 1,
          "backward: loss must be scalar, got shape " +
              nodes_[loss].value.shape_str());
  for (NodeId i = 0; i <= loss; ++i) {
    if (nodes_[i].needs_grad) {
      nodes_[i].grad = Tensor(nodes_[i].value.shape());
    }
  }
  if (!nodes_[loss].needs_grad) return;  // loss independent of parameters
  nodes_[loss].grad.fill(1.0);
  for (NodeId i = loss; i >= 0; --i) {
    if (nodes_[i].needs_grad && nodes_[i].backprop) nodes_[i].backprop();
  }
}

}  // namespace flowsense::neural
