#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "torusop/grid.hpp"
#include "torusop/sampler.hpp"

namespace torusop {

// Coordinate-augmented convolutional baseline on grid values: circular
// padding, 3x3 kernels, channel plan (2+2)->32->32->32->2 with ReLU between
// layers. Deliberately gauge-sensitive.

struct ConvLayer {
  int in_ch = 0, out_ch = 0;
  std::vector<double> w;  // [out][in][3][3]
  std::vector<double> b;  // [out]

  double& wat(int o, int c, int di, int dj) {
    return w[((static_cast<size_t>(o) * in_ch + c) * 3 + di) * 3 + dj];
  }
  double wat(int o, int c, int di, int dj) const {
    return w[((static_cast<size_t>(o) * in_ch + c) * 3 + di) * 3 + dj];
  }
};

struct CoordCnnModel {
  std::vector<ConvLayer> layers;
};

// channel 0 = x1/2pi = i1/n, channel 1 = x2/2pi = i2/n at grid nodes.
inline std::vector<double> coord_channels(Resolution res) {
  const int n = res.n;
  std::vector<double> c(static_cast<size_t>(2) * n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      c[static_cast<size_t>(i) * n + j] = static_cast<double>(i) / n;
      c[static_cast<size_t>(n) * n + i * n + j] = static_cast<double>(j) / n;
    }
  return c;
}

struct CnnCache {
  Resolution res;
  // acts[0] is the 4-channel input; acts[l] for l >= 1 is layer l's output
  // after its ReLU (raw for the last layer).
  std::vector<std::vector<double>> acts;
};

namespace detail {

// plane-major activations [ch][i][j] -> column matrix [n^2 x in_ch*9] with
// circular padding; column index c*9 + (di+1)*3 + (dj+1).
inline void im2col(const std::vector<double>& act, int ch, int n,
                   Eigen::MatrixXd& col) {
  col.resize(static_cast<Eigen::Index>(n) * n, static_cast<Eigen::Index>(ch) * 9);
  for (int c = 0; c < ch; ++c) {
    const double* plane = act.data() + static_cast<size_t>(c) * n * n;
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj) {
        int s = c * 9 + (di + 1) * 3 + (dj + 1);
        for (int i = 0; i < n; ++i) {
          int ii = i + di;
          ii += (ii < 0) ? n : (ii >= n ? -n : 0);
          for (int j = 0; j < n; ++j) {
            int jj = j + dj;
            jj += (jj < 0) ? n : (jj >= n ? -n : 0);
            col(static_cast<Eigen::Index>(i) * n + j, s) = plane[ii * n + jj];
          }
        }
      }
  }
}

// Transpose of im2col: scatter-add columns back onto the padded-gather sites.
inline void col2im(const Eigen::MatrixXd& col, int ch, int n,
                   std::vector<double>& act) {
  act.assign(static_cast<size_t>(ch) * n * n, 0.0);
  for (int c = 0; c < ch; ++c) {
    double* plane = act.data() + static_cast<size_t>(c) * n * n;
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj) {
        int s = c * 9 + (di + 1) * 3 + (dj + 1);
        for (int i = 0; i < n; ++i) {
          int ii = i + di;
          ii += (ii < 0) ? n : (ii >= n ? -n : 0);
          for (int j = 0; j < n; ++j) {
            int jj = j + dj;
            jj += (jj < 0) ? n : (jj >= n ? -n : 0);
            plane[ii * n + jj] += col(static_cast<Eigen::Index>(i) * n + j, s);
          }
        }
      }
  }
}

}  // namespace detail

inline GridField cnn_forward(const CoordCnnModel& model, const GridField& f,
                             CnnCache* cache = nullptr) {
  const int n = f.res.n;
  const size_t plane = static_cast<size_t>(n) * n;

  std::vector<std::vector<double>> acts;
  acts.reserve(model.layers.size() + 1);
  std::vector<double> input(4 * plane);
  std::copy(f.data.begin(), f.data.end(), input.begin());
  std::vector<double> coords = coord_channels(f.res);
  std::copy(coords.begin(), coords.end(), input.begin() + 2 * plane);
  acts.push_back(std::move(input));

  Eigen::MatrixXd col, out;
  for (size_t l = 0; l < model.layers.size(); ++l) {
    const ConvLayer& layer = model.layers[l];
    detail::im2col(acts.back(), layer.in_ch, n, col);
    Eigen::MatrixXd W(static_cast<Eigen::Index>(layer.in_ch) * 9, layer.out_ch);
    for (int o = 0; o < layer.out_ch; ++o)
      for (int c = 0; c < layer.in_ch; ++c)
        for (int di = 0; di < 3; ++di)
          for (int dj = 0; dj < 3; ++dj)
            W(c * 9 + di * 3 + dj, o) = layer.wat(o, c, di, dj);
    out.noalias() = col * W;
    std::vector<double> act(static_cast<size_t>(layer.out_ch) * plane);
    const bool last = (l + 1 == model.layers.size());
    for (int o = 0; o < layer.out_ch; ++o)
      for (size_t p = 0; p < plane; ++p) {
        double v = out(static_cast<Eigen::Index>(p), o) + layer.b[o];
        act[static_cast<size_t>(o) * plane + p] = last ? v : std::max(0.0, v);
      }
    acts.push_back(std::move(act));
  }

  GridField result(f.res);
  std::copy(acts.back().begin(), acts.back().end(), result.data.begin());
  if (cache) {
    cache->res = f.res;
    cache->acts = std::move(acts);
  }
  return result;
}

inline size_t cnn_param_count(const CoordCnnModel& m) {
  size_t c = 0;
  for (const auto& l : m.layers) c += l.w.size() + l.b.size();
  return c;
}

inline std::vector<double> cnn_pack(const CoordCnnModel& m) {
  std::vector<double> p;
  p.reserve(cnn_param_count(m));
  for (const auto& l : m.layers) {
    p.insert(p.end(), l.w.begin(), l.w.end());
    p.insert(p.end(), l.b.begin(), l.b.end());
  }
  return p;
}

inline void cnn_unpack(CoordCnnModel& m, const std::vector<double>& p) {
  if (p.size() != cnn_param_count(m))
    throw CacheMismatch("cnn_unpack: parameter vector size mismatch");
  size_t o = 0;
  for (auto& l : m.layers) {
    for (double& v : l.w) v = p[o++];
    for (double& v : l.b) v = p[o++];
  }
}

// Exact reverse-mode gradients (correlation/convolution adjoint pair with
// circular padding; ReLU masks from the cached activations). Returns the flat
// parameter gradient in cnn_pack order plus the gradient with respect to the
// two field channels.
inline std::pair<std::vector<double>, GridField> cnn_backward(
    const CoordCnnModel& model, const CnnCache& cache,
    const GridField& grad_out) {
  if (cache.acts.size() != model.layers.size() + 1 ||
      cache.res != grad_out.res)
    throw CacheMismatch("cnn_backward: cache does not match model/input");
  const int n = cache.res.n;
  const size_t plane = static_cast<size_t>(n) * n;

  std::vector<std::vector<double>> layer_wgrads(model.layers.size());
  std::vector<std::vector<double>> layer_bgrads(model.layers.size());

  std::vector<double> g(grad_out.data.begin(), grad_out.data.end());
  Eigen::MatrixXd col, G, Wg, Gin;
  for (size_t l = model.layers.size(); l-- > 0;) {
    const ConvLayer& layer = model.layers[l];
    // ReLU mask of this layer's output (not applied to the last, linear layer).
    if (l + 1 != model.layers.size()) {
      const std::vector<double>& a = cache.acts[l + 1];
      for (size_t i = 0; i < g.size(); ++i)
        if (a[i] <= 0.0) g[i] = 0.0;
    }
    G.resize(static_cast<Eigen::Index>(plane), layer.out_ch);
    for (int o = 0; o < layer.out_ch; ++o)
      for (size_t p = 0; p < plane; ++p)
        G(static_cast<Eigen::Index>(p), o) = g[static_cast<size_t>(o) * plane + p];

    detail::im2col(cache.acts[l], layer.in_ch, n, col);
    Wg.noalias() = col.transpose() * G;  // [in*9, out]
    layer_wgrads[l].resize(layer.w.size());
    layer_bgrads[l].assign(layer.out_ch, 0.0);
    for (int o = 0; o < layer.out_ch; ++o) {
      for (int c = 0; c < layer.in_ch; ++c)
        for (int di = 0; di < 3; ++di)
          for (int dj = 0; dj < 3; ++dj)
            layer_wgrads[l][((static_cast<size_t>(o) * layer.in_ch + c) * 3 + di) * 3 + dj] =
                Wg(c * 9 + di * 3 + dj, o);
      layer_bgrads[l][o] = G.col(o).sum();
    }

    Eigen::MatrixXd W(static_cast<Eigen::Index>(layer.in_ch) * 9, layer.out_ch);
    for (int o = 0; o < layer.out_ch; ++o)
      for (int c = 0; c < layer.in_ch; ++c)
        for (int di = 0; di < 3; ++di)
          for (int dj = 0; dj < 3; ++dj)
            W(c * 9 + di * 3 + dj, o) = layer.wat(o, c, di, dj);
    Gin.noalias() = G * W.transpose();  // [n^2, in*9]
    detail::col2im(Gin, layer.in_ch, n, g);
  }

  std::vector<double> flat;
  flat.reserve(cnn_param_count(model));
  for (size_t l = 0; l < model.layers.size(); ++l) {
    flat.insert(flat.end(), layer_wgrads[l].begin(), layer_wgrads[l].end());
    flat.insert(flat.end(), layer_bgrads[l].begin(), layer_bgrads[l].end());
  }
  GridField grad_in(cache.res);
  std::copy(g.begin(), g.begin() + 2 * plane, grad_in.data.begin());
  return {std::move(flat), std::move(grad_in)};
}

// He-uniform weights, zero biases.
inline CoordCnnModel init_coordcnn(SeededRng& rng,
                                   const std::vector<int>& plan = {4, 32, 32,
                                                                   32, 2}) {
  CoordCnnModel m;
  for (size_t l = 0; l + 1 < plan.size(); ++l) {
    ConvLayer layer;
    layer.in_ch = plan[l];
    layer.out_ch = plan[l + 1];
    layer.w.resize(static_cast<size_t>(layer.out_ch) * layer.in_ch * 9);
    layer.b.assign(layer.out_ch, 0.0);
    double limit = std::sqrt(6.0 / (static_cast<double>(layer.in_ch) * 9));
    for (double& v : layer.w) {
      double u = static_cast<double>(rng.next_u64() >> 11) * 0x1.0p-53;
      v = limit * (2.0 * u - 1.0);
    }
    m.layers.push_back(std::move(layer));
  }
  return m;
}

}  // namespace torusop
