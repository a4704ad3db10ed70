// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#include "hypernas/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace hypernas {

namespace {

using detail::Node;

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape() == b.shape(),
            fmt::format("{}: shape mismatch {} vs {}", op, shape_str(a.shape()), shape_str(b.shape())));
}

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
    require(t.rank() == rank,
            fmt::format("{}: {} must have rank {}, got shape {}", op, what, rank, shape_str(t.shape())));
}

// Adds `values` into the gradient of input `i` if that input wants one.
template <typename F>
void accumulate(Node& self, std::size_t i, F&& fill) {
    Node& in = *self.inputs[i];
    if (!in.requires_grad) return;
    fill(in.ensure_grad());
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding,
                               std::size_t dilation) {
    const std::ptrdiff_t span = static_cast<std::ptrdiff_t>(dilation * (kernel - 1) + 1);
    const std::ptrdiff_t padded = static_cast<std::ptrdiff_t>(in + 2 * padding);
    if (padded < span) return 0;
    return static_cast<std::size_t>((padded - span) / static_cast<std::ptrdiff_t>(stride)) + 1;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<Scalar> out(a.numel());
    const auto x = a.data();
    const auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    const Tensor inputs[] = {a, b};
    return Tensor::make_result(a.shape(), std::move(out), inputs, "add", [](Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            accumulate(self, k, [&](std::vector<Scalar>& g) {
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            });
        }
    });
}

Tensor add_all(std::span<const Tensor> terms) {
    require(!terms.empty(), "add_all: no terms");
    for (const auto& t : terms) require_same_shape(terms[0], t, "add_all");
    std::vector<Scalar> out(terms[0].numel(), 0.0);
    for (const auto& t : terms) {
        const auto d = t.data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += d[i];
    }
    return Tensor::make_result(terms[0].shape(), std::move(out), terms, "add_all", [](Node& self) {
        for (std::size_t k = 0; k < self.inputs.size(); ++k) {
            accumulate(self, k, [&](std::vector<Scalar>& g) {
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            });
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<Scalar> out(a.numel());
    const auto x = a.data();
    const auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    const Tensor inputs[] = {a, b};
    return Tensor::make_result(a.shape(), std::move(out), inputs, "mul", [](Node& self) {
        const auto& x = self.inputs[0]->data;
        const auto& y = self.inputs[1]->data;
        accumulate(self, 0, [&](std::vector<Scalar>& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y[i];
        });
        accumulate(self, 1, [&](std::vector<Scalar>& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x[i];
        });
    });
}

Tensor scale(const Tensor& x, Scalar factor) {
    std::vector<Scalar> out(x.data().begin(), x.data().end());
    for (auto& v : out) v *= factor;
    const Tensor inputs[] = {x};
    return Tensor::make_result(x.shape(), std::move(out), inputs, "scale", [factor](Node& self) {
        accumulate(self, 0, [&](std::vector<Scalar>& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
        });
    });
}

Tensor sum(const Tensor& x) {
    const auto d = x.data();
    const Scalar total = std::accumulate(d.begin(), d.end(), Scalar{0});
    const Tensor inputs[] = {x};
    return Tensor::make_result(Shape{}, {total}, inputs, "sum", [](Node& self) {
        accumulate(self, 0, [&](std::vector<Scalar>& g) {
            for (auto& v : g) v += self.grad[0];
        });
    });
}

Tensor relu(const Tensor& x) {
    std::vector<Scalar> out(x.data().begin(), x.data().end());
    for (auto& v : out) v = v > 0 ? v : 0;
    const Tensor inputs[] = {x};
    return Tensor::make_result(x.shape(), std::move(out), inputs, "relu", [](Node& self) {
        const auto& in = self.inputs[0]->data;
        accumulate(self, 0, [&](std::vector<Scalar>& g) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (in[i] > 0) g[i] += self.grad[i];
            }
        });
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    require(shape_numel(shape) == x.numel(),
            fmt::format("reshape: cannot view {} as {}", shape_str(x.shape()), shape_str(shape)));
    std::vector<Scalar> out(x.data().begin(), x.data().end());
    const Tensor inputs[] = {x};
    return Tensor::make_result(std::move(shape), std::move(out), inputs, "reshape", [](Node& self) {
        accumulate(self, 0, [&](std::vector<Scalar>& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        });
    });
}

Tensor weighted_sum(std::span<const Tensor> terms, const Tensor& weights) {
    require(!terms.empty(), "weighted_sum: no terms");
    require_rank(weights, 1, "weighted_sum", "weights");
    require(weights.numel() == terms.size(),
            fmt::format("weighted_sum: {} terms but {} weights", terms.size(), weights.numel()));
    for (const auto& t : terms) require_same_shape(terms[0], t, "weighted_sum");

    const auto w = weights.data();
    std::vector<Scalar> out(terms[0].numel(), 0.0);
    for (std::size_t k = 0; k < terms.size(); ++k) {
        const auto d = terms[k].data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[k] * d[i];
    }
    std::vector<Tensor> inputs(terms.begin(), terms.end());
    inputs.push_back(weights);
    return Tensor::make_result(terms[0].shape(), std::move(out), inputs, "weighted_sum", [](Node& self) {
        const std::size_t n = self.inputs.size() - 1;
        const auto& w = self.inputs[n]->data;
        for (std::size_t k = 0; k < n; ++k) {
            accumulate(self, k, [&](std::vector<Scalar>& g) {
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += w[k] * self.grad[i];
            });
        }
        accumulate(self, n, [&](std::vector<Scalar>& g) {
            for (std::size_t k = 0; k < n; ++k) {
                const auto& d = self.inputs[k]->data;
                Scalar dot = 0;
                for (std::size_t i = 0; i < d.size(); ++i) dot += d[i] * self.grad[i];
                g[k] += dot;
            }
        });
    });
}

Tensor gather(const Tensor& x, std::span<const std::size_t> indices) {
    require_rank(x, 1, "gather", "input");
    std::vector<Scalar> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        require(i < x.numel(), fmt::format("gather: index {} out of range for length {}", i, x.numel()));
        out.push_back(x[i]);
    }
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    const Tensor inputs[] = {x};
    Shape shape{idx.size()};
    return Tensor::make_result(std::move(shape), std::move(out), inputs, "gather",
                               [idx = std::move(idx)](Node& self) {
                                   accumulate(self, 0, [&](std::vector<Scalar>& g) {
                                       for (std::size_t k = 0; k < idx.size(); ++k) g[idx[k]] += self.grad[k];
                                   });
                               });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    const Shape& shape = x.shape();
    require(axis < shape.size(), fmt::format("softmax: axis {} out of range for shape {}", axis, shape_str(shape)));
    const std::size_t extent = shape[axis];
    std::size_t outer = 1;
    std::size_t inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];

    const auto in = x.data();
    std::vector<Scalar> out(in.size());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t r = 0; r < inner; ++r) {
            const std::size_t base = o * extent * inner + r;
            Scalar peak = -std::numeric_limits<Scalar>::infinity();
            for (std::size_t k = 0; k < extent; ++k) peak = std::max(peak, in[base + k * inner]);
            Scalar denom = 0;
            for (std::size_t k = 0; k < extent; ++k) {
                const Scalar e = std::exp(in[base + k * inner] - peak);
                out[base + k * inner] = e;
                denom += e;
            }
            for (std::size_t k = 0; k < extent; ++k) out[base + k * inner] /= denom;
        }
    }
    const Tensor inputs[] = {x};
    return Tensor::make_result(shape, std::move(out), inputs, "softmax", [outer, extent, inner](Node& self) {
        accumulate(self, 0, [&](std::vector<Scalar>& g) {
            const auto& y = self.data;
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t r = 0; r < inner; ++r) {
                    const std::size_t base = o * extent * inner + r;
                    Scalar dot = 0;
                    for (std::size_t k = 0; k < extent; ++k) dot += self.grad[base + k * inner] * y[base + k * inner];
                    for (std::size_t k = 0; k < extent; ++k) {
                        const std::size_t i = base + k * inner;
                        g[i] += y[i] * (self.grad[i] - dot);
                    }
                }
            }
        });
    });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
    require_rank(logits, 2, "cross_entropy", "logits");
    const std::size_t n = logits.dim(0);
    const std::size_t c = logits.dim(1);
    require(labels.size() == n, fmt::format("cross_entropy: {} rows but {} labels", n, labels.size()));
    for (int label : labels) {
        require(label >= 0 && static_cast<std::size_t>(label) < c,
                fmt::format("cross_entropy: label {} outside [0, {})", label, c));
    }
    const auto z = logits.data();
    std::vector<Scalar> probs(n * c);
    Scalar loss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Scalar* row = z.data() + i * c;
        const Scalar peak = *std::max_element(row, row + c);
        Scalar denom = 0;
        for (std::size_t k = 0; k < c; ++k) {
            probs[i * c + k] = std::exp(row[k] - peak);
            denom += probs[i * c + k];
        }
        for (std::size_t k = 0; k < c; ++k) probs[i * c + k] /= denom;
        loss += std::log(denom) + peak - row[labels[i]];
    }
    loss /= static_cast<Scalar>(n);
    std::vector<int> y(labels.begin(), labels.end());
    const Tensor inputs[] = {logits};
    return Tensor::make_result(
        Shape{}, {loss}, inputs, "cross_entropy",
        [probs = std::move(probs), y = std::move(y), n, c](Node& self) {
            accumulate(self, 0, [&](std::vector<Scalar>& g) {
                const Scalar s = self.grad[0] / static_cast<Scalar>(n);
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t k = 0; k < c; ++k) {
                        const Scalar onehot = static_cast<int>(k) == y[i] ? 1.0 : 0.0;
                        g[i * c + k] += s * (probs[i * c + k] - onehot);
                    }
                }
            });
        });
}

Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require_rank(input, 2, "fully_connected", "input");
    require_rank(weight, 2, "fully_connected", "weight");
    require_rank(bias, 1, "fully_connected", "bias");
    const std::size_t n = input.dim(0);
    const std::size_t fin = input.dim(1);
    const std::size_t fout = weight.dim(0);
    require(weight.dim(1) == fin,
            fmt::format("fully_connected: input features {} but weight expects {}", fin, weight.dim(1)));
    require(bias.dim(0) == fout, fmt::format("fully_connected: bias length {} but {} outputs", bias.dim(0), fout));

    const auto x = input.data();
    const auto w = weight.data();
    const auto b = bias.data();
    std::vector<Scalar> out(n * fout);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < fout; ++o) {
            Scalar acc = b[o];
            const Scalar* wr = w.data() + o * fin;
            const Scalar* xr = x.data() + i * fin;
            for (std::size_t k = 0; k < fin; ++k) acc += wr[k] * xr[k];
            out[i * fout + o] = acc;
        }
    }
    const Tensor inputs[] = {input, weight, bias};
    return Tensor::make_result(Shape{n, fout}, std::move(out), inputs, "fully_connected",
                               [n, fin, fout](Node& self) {
                                   const auto& x = self.inputs[0]->data;
                                   const auto& w = self.inputs[1]->data;
                                   const auto& gy = self.grad;
                                   accumulate(self, 0, [&](std::vector<Scalar>& g) {
                                       for (std::size_t i = 0; i < n; ++i)
                                           for (std::size_t o = 0; o < fout; ++o) {
                                               const Scalar go = gy[i * fout + o];
                                               if (go == 0) continue;
                                               const Scalar* wr = w.data() + o * fin;
                                               for (std::size_t k = 0; k < fin; ++k) g[i * fin + k] += go * wr[k];
                                           }
                                   });
                                   accumulate(self, 1, [&](std::vector<Scalar>& g) {
                                       for (std::size_t i = 0; i < n; ++i)
                                           for (std::size_t o = 0; o < fout; ++o) {
                                               const Scalar go = gy[i * fout + o];
                                               if (go == 0) continue;
                                               const Scalar* xr = x.data() + i * fin;
                                               for (std::size_t k = 0; k < fin; ++k) g[o * fin + k] += go * xr[k];
                                           }
                                   });
                                   accumulate(self, 2, [&](std::vector<Scalar>& g) {
                                       for (std::size_t i = 0; i < n; ++i)
                                           for (std::size_t o = 0; o < fout; ++o) g[o] += gy[i * fout + o];
                                   });
                               });
}

namespace {

struct ConvGeometry {
    std::size_t n, c_in, h, w, c_out, c_in_group, kh, kw, oh, ow, groups, stride, pad, dil;

    // Valid output range [lo, hi) for a kernel tap at offset `tap` along one axis.
    std::pair<std::size_t, std::size_t> valid(std::size_t tap, std::size_t in_extent, std::size_t out_extent) const {
        // in = o*stride - pad + tap*dil must lie in [0, in_extent)
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(tap * dil) - static_cast<std::ptrdiff_t>(pad);
        const auto s = static_cast<std::ptrdiff_t>(stride);
        std::ptrdiff_t lo = shift >= 0 ? 0 : (-shift + s - 1) / s;
        std::ptrdiff_t hi = (static_cast<std::ptrdiff_t>(in_extent) - 1 - shift);
        hi = hi < 0 ? 0 : hi / s + 1;
        hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_extent));
        if (lo > hi) lo = hi;
        return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
    }
    std::size_t in_index(std::size_t o, std::size_t tap) const { return o * stride + tap * dil - pad; }
};

// Visits every (input element, weight element, output element) triple of the
// convolution once, in a fixed order.
template <typename F>
void for_each_conv_tap(const ConvGeometry& g, F&& visit) {
    const std::size_t c_out_group = g.c_out / g.groups;
    for (std::size_t b = 0; b < g.n; ++b) {
        for (std::size_t oc = 0; oc < g.c_out; ++oc) {
            const std::size_t grp = oc / c_out_group;
            for (std::size_t icg = 0; icg < g.c_in_group; ++icg) {
                const std::size_t ic = grp * g.c_in_group + icg;
                const std::size_t in_plane = (b * g.c_in + ic) * g.h * g.w;
                const std::size_t out_plane = (b * g.c_out + oc) * g.oh * g.ow;
                const std::size_t w_base = (oc * g.c_in_group + icg) * g.kh * g.kw;
                for (std::size_t ky = 0; ky < g.kh; ++ky) {
                    const auto [y0, y1] = g.valid(ky, g.h, g.oh);
                    for (std::size_t kx = 0; kx < g.kw; ++kx) {
                        const auto [x0, x1] = g.valid(kx, g.w, g.ow);
                        const std::size_t wi = w_base + ky * g.kw + kx;
                        for (std::size_t oy = y0; oy < y1; ++oy) {
                            const std::size_t iy = g.in_index(oy, ky);
                            visit(in_plane + iy * g.w, wi, out_plane + oy * g.ow, x0, x1, kx);
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Conv2dOptions& options) {
    require_rank(input, 4, "conv2d", "input");
    require_rank(weight, 4, "conv2d", "weight");
    require(options.stride >= 1, "conv2d: stride must be >= 1");
    require(options.dilation >= 1, "conv2d: dilation must be >= 1");
    require(options.groups >= 1, "conv2d: groups must be >= 1");
    ConvGeometry g{};
    g.n = input.dim(0);
    g.c_in = input.dim(1);
    g.h = input.dim(2);
    g.w = input.dim(3);
    g.c_out = weight.dim(0);
    g.c_in_group = weight.dim(1);
    g.kh = weight.dim(2);
    g.kw = weight.dim(3);
    g.groups = options.groups;
    g.stride = options.stride;
    g.pad = options.padding;
    g.dil = options.dilation;
    require(g.c_in % g.groups == 0,
            fmt::format("conv2d: input channels {} not divisible by groups {}", g.c_in, g.groups));
    require(g.c_out % g.groups == 0,
            fmt::format("conv2d: output channels {} not divisible by groups {}", g.c_out, g.groups));
    require(g.c_in_group == g.c_in / g.groups,
            fmt::format("conv2d: weight dim 1 is {} but input channels/groups is {}", g.c_in_group,
                        g.c_in / g.groups));
    g.oh = conv_output_extent(g.h, g.kh, g.stride, g.pad, g.dil);
    g.ow = conv_output_extent(g.w, g.kw, g.stride, g.pad, g.dil);
    require(g.oh > 0, fmt::format("conv2d: height {} too small for kernel {} (dilation {}, padding {})", g.h, g.kh,
                                  g.dil, g.pad));
    require(g.ow > 0, fmt::format("conv2d: width {} too small for kernel {} (dilation {}, padding {})", g.w, g.kw,
                                  g.dil, g.pad));

    const Scalar* x = input.data().data();
    const Scalar* wt = weight.data().data();
    std::vector<Scalar> out(g.n * g.c_out * g.oh * g.ow, 0.0);
    Scalar* y = out.data();
    for_each_conv_tap(g, [&](std::size_t in_row, std::size_t wi, std::size_t out_row, std::size_t x0, std::size_t x1,
                             std::size_t kx) {
        const Scalar wv = wt[wi];
        for (std::size_t ox = x0; ox < x1; ++ox) y[out_row + ox] += wv * x[in_row + g.in_index(ox, kx)];
    });

    const Tensor inputs[] = {input, weight};
    return Tensor::make_result(Shape{g.n, g.c_out, g.oh, g.ow}, std::move(out), inputs, "conv2d", [g](Node& self) {
        const Scalar* x = self.inputs[0]->data.data();
        const Scalar* wt = self.inputs[1]->data.data();
        const Scalar* gy = self.grad.data();
        accumulate(self, 0, [&](std::vector<Scalar>& gx_vec) {
            Scalar* gx = gx_vec.data();
            for_each_conv_tap(g, [&](std::size_t in_row, std::size_t wi, std::size_t out_row, std::size_t x0,
                                     std::size_t x1, std::size_t kx) {
                const Scalar wv = wt[wi];
                for (std::size_t ox = x0; ox < x1; ++ox) gx[in_row + g.in_index(ox, kx)] += wv * gy[out_row + ox];
            });
        });
        accumulate(self, 1, [&](std::vector<Scalar>& gw) {
            for_each_conv_tap(g, [&](std::size_t in_row, std::size_t wi, std::size_t out_row, std::size_t x0,
                                     std::size_t x1, std::size_t kx) {
                Scalar acc = 0;
                for (std::size_t ox = x0; ox < x1; ++ox) acc += x[in_row + g.in_index(ox, kx)] * gy[out_row + ox];
                gw[wi] += acc;
            });
        });
    });
}

Tensor pool2d(const Tensor& input, PoolKind kind, const Pool2dOptions& options) {
    require_rank(input, 4, "pool2d", "input");
    require(options.stride >= 1, fmt::format("pool2d: invalid stride {}", options.stride));
    require(options.kernel >= 1, "pool2d: kernel must be >= 1");
    const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::size_t k = options.kernel, s = options.stride, p = options.padding;
    const std::size_t oh = conv_output_extent(h, k, s, p, 1);
    const std::size_t ow = conv_output_extent(w, k, s, p, 1);
    require(oh > 0 && ow > 0, fmt::format("pool2d: input {} too small for kernel {}", shape_str(input.shape()), k));

    const auto x = input.data();
    std::vector<Scalar> out(n * c * oh * ow);
    // max: flat input index of the winner; avg: tap count.
    std::vector<std::size_t> route(out.size());
    for (std::size_t plane = 0; plane < n * c; ++plane) {
        const std::size_t in_base = plane * h * w;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t ys = static_cast<std::ptrdiff_t>(oy * s) - static_cast<std::ptrdiff_t>(p);
            const std::size_t y0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(ys, 0));
            const std::size_t y1 = static_cast<std::size_t>(
                std::min<std::ptrdiff_t>(ys + static_cast<std::ptrdiff_t>(k), static_cast<std::ptrdiff_t>(h)));
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const std::ptrdiff_t xs = static_cast<std::ptrdiff_t>(ox * s) - static_cast<std::ptrdiff_t>(p);
                const std::size_t x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(xs, 0));
                const std::size_t x1 = static_cast<std::size_t>(
                    std::min<std::ptrdiff_t>(xs + static_cast<std::ptrdiff_t>(k), static_cast<std::ptrdiff_t>(w)));
                const std::size_t o = (plane * oh + oy) * ow + ox;
                if (kind == PoolKind::max) {
                    std::size_t best = in_base + y0 * w + x0;
                    for (std::size_t iy = y0; iy < y1; ++iy)
                        for (std::size_t ix = x0; ix < x1; ++ix) {
                            const std::size_t i = in_base + iy * w + ix;
                            if (x[i] > x[best]) best = i;
                        }
                    out[o] = x[best];
                    route[o] = best;
                } else {
                    Scalar acc = 0;
                    for (std::size_t iy = y0; iy < y1; ++iy)
                        for (std::size_t ix = x0; ix < x1; ++ix) acc += x[in_base + iy * w + ix];
                    const std::size_t count = (y1 - y0) * (x1 - x0);
                    out[o] = acc / static_cast<Scalar>(count);
                    route[o] = count;
                }
            }
        }
    }
    const Tensor inputs[] = {input};
    const char* name = kind == PoolKind::max ? "max_pool2d" : "avg_pool2d";
    return Tensor::make_result(
        Shape{n, c, oh, ow}, std::move(out), inputs, name,
        [route = std::move(route), kind, n, c, h, w, oh, ow, k, s, p](Node& self) {
            accumulate(self, 0, [&](std::vector<Scalar>& g) {
                if (kind == PoolKind::max) {
                    for (std::size_t o = 0; o < route.size(); ++o) g[route[o]] += self.grad[o];
                    return;
                }
                for (std::size_t plane = 0; plane < n * c; ++plane) {
                    const std::size_t in_base = plane * h * w;
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        const std::ptrdiff_t ys = static_cast<std::ptrdiff_t>(oy * s) - static_cast<std::ptrdiff_t>(p);
                        const std::size_t y0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(ys, 0));
                        const std::size_t y1 = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
                            ys + static_cast<std::ptrdiff_t>(k), static_cast<std::ptrdiff_t>(h)));
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const std::ptrdiff_t xs =
                                static_cast<std::ptrdiff_t>(ox * s) - static_cast<std::ptrdiff_t>(p);
                            const std::size_t x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(xs, 0));
                            const std::size_t x1 = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
                                xs + static_cast<std::ptrdiff_t>(k), static_cast<std::ptrdiff_t>(w)));
                            const std::size_t o = (plane * oh + oy) * ow + ox;
                            const Scalar share = self.grad[o] / static_cast<Scalar>(route[o]);
                            for (std::size_t iy = y0; iy < y1; ++iy)
                                for (std::size_t ix = x0; ix < x1; ++ix) g[in_base + iy * w + ix] += share;
                        }
                    }
                }
            });
        });
}

Tensor batch_standardize(const Tensor& input, Scalar eps) {
    require_rank(input, 4, "batch_standardize", "input");
    const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
    const Scalar count = static_cast<Scalar>(n * hw);
    const auto x = input.data();
    std::vector<Scalar> out(x.size());
    std::vector<Scalar> inv_std(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
        Scalar mean = 0;
        for (std::size_t b = 0; b < n; ++b) {
            const Scalar* p = x.data() + (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) mean += p[i];
        }
        mean /= count;
        Scalar var = 0;
        for (std::size_t b = 0; b < n; ++b) {
            const Scalar* p = x.data() + (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) var += (p[i] - mean) * (p[i] - mean);
        }
        var /= count;
        inv_std[ch] = 1.0 / std::sqrt(var + eps);
        for (std::size_t b = 0; b < n; ++b) {
            const std::size_t base = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) out[base + i] = (x[base + i] - mean) * inv_std[ch];
        }
    }
    const Tensor inputs[] = {input};
    return Tensor::make_result(
        input.shape(), std::move(out), inputs, "batch_standardize",
        [inv_std = std::move(inv_std), n, c, hw, count](Node& self) {
            accumulate(self, 0, [&](std::vector<Scalar>& g) {
                const auto& y = self.data;
                const auto& gy = self.grad;
                for (std::size_t ch = 0; ch < c; ++ch) {
                    Scalar mean_g = 0;
                    Scalar mean_gy = 0;
                    for (std::size_t b = 0; b < n; ++b) {
                        const std::size_t base = (b * c + ch) * hw;
                        for (std::size_t i = 0; i < hw; ++i) {
                            mean_g += gy[base + i];
                            mean_gy += gy[base + i] * y[base + i];
                        }
                    }
                    mean_g /= count;
                    mean_gy /= count;
                    for (std::size_t b = 0; b < n; ++b) {
                        const std::size_t base = (b * c + ch) * hw;
                        for (std::size_t i = 0; i < hw; ++i) {
                            g[base + i] += inv_std[ch] * (gy[base + i] - mean_g - y[base + i] * mean_gy);
                        }
                    }
                }
            });
        });
}

Tensor global_avg_pool(const Tensor& input) {
    require_rank(input, 4, "global_avg_pool", "input");
    const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
    const auto x = input.data();
    std::vector<Scalar> out(n * c);
    for (std::size_t i = 0; i < n * c; ++i) {
        Scalar acc = 0;
        for (std::size_t j = 0; j < hw; ++j) acc += x[i * hw + j];
        out[i] = acc / static_cast<Scalar>(hw);
    }
    const Tensor inputs[] = {input};
    return Tensor::make_result(Shape{n, c}, std::move(out), inputs, "global_avg_pool", [hw](Node& self) {
        accumulate(self, 0, [&](std::vector<Scalar>& g) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const Scalar share = self.grad[i] / static_cast<Scalar>(hw);
                for (std::size_t j = 0; j < hw; ++j) g[i * hw + j] += share;
            }
        });
    });
}

Tensor concat_channels(std::span<const Tensor> parts) {
    require(!parts.empty(), "concat_channels: no inputs");
    for (const auto& p : parts) require_rank(p, 4, "concat_channels", "input");
    const std::size_t n = parts[0].dim(0), h = parts[0].dim(2), w = parts[0].dim(3);
    std::size_t c_total = 0;
    std::vector<std::size_t> channels;
    for (const auto& p : parts) {
        require(p.dim(0) == n && p.dim(2) == h && p.dim(3) == w,
                fmt::format("concat_channels: shape {} incompatible with {}", shape_str(p.shape()),
                            shape_str(parts[0].shape())));
        channels.push_back(p.dim(1));
        c_total += p.dim(1);
    }
    const std::size_t hw = h * w;
    std::vector<Scalar> out(n * c_total * hw);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto d = parts[k].data();
        for (std::size_t b = 0; b < n; ++b) {
            std::copy_n(d.data() + b * channels[k] * hw, channels[k] * hw,
                        out.data() + (b * c_total + offset) * hw);
        }
        offset += channels[k];
    }
    return Tensor::make_result(Shape{n, c_total, h, w}, std::move(out), parts, "concat_channels",
                               [channels = std::move(channels), n, c_total, hw](Node& self) {
                                   std::size_t offset = 0;
                                   for (std::size_t k = 0; k < channels.size(); ++k) {
                                       accumulate(self, k, [&](std::vector<Scalar>& g) {
                                           for (std::size_t b = 0; b < n; ++b) {
                                               const Scalar* src = self.grad.data() + (b * c_total + offset) * hw;
                                               Scalar* dst = g.data() + b * channels[k] * hw;
                                               for (std::size_t i = 0; i < channels[k] * hw; ++i) dst[i] += src[i];
                                           }
                                       });
                                       offset += channels[k];
                                   }
                               });
}

namespace {

// Strided window copy shared by crop2d and subsample2d.
Tensor spatial_select(const Tensor& input, std::size_t top, std::size_t left, std::size_t stride, const char* op) {
    require_rank(input, 4, op, "input");
    const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    require(top < h && left < w, fmt::format("{}: offset ({}, {}) exhausts input {}", op, top, left,
                                             shape_str(input.shape())));
    const std::size_t oh = (h - top + stride - 1) / stride;
    const std::size_t ow = (w - left + stride - 1) / stride;
    const auto x = input.data();
    std::vector<Scalar> out(n * c * oh * ow);
    for (std::size_t plane = 0; plane < n * c; ++plane)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xx = 0; xx < ow; ++xx)
                out[(plane * oh + y) * ow + xx] = x[plane * h * w + (top + y * stride) * w + left + xx * stride];
    const Tensor inputs[] = {input};
    return Tensor::make_result(Shape{n, c, oh, ow}, std::move(out), inputs, op,
                               [n, c, h, w, oh, ow, top, left, stride](Node& self) {
                                   accumulate(self, 0, [&](std::vector<Scalar>& g) {
                                       for (std::size_t plane = 0; plane < n * c; ++plane)
                                           for (std::size_t y = 0; y < oh; ++y)
                                               for (std::size_t xx = 0; xx < ow; ++xx)
                                                   g[plane * h * w + (top + y * stride) * w + left + xx * stride] +=
                                                       self.grad[(plane * oh + y) * ow + xx];
                                   });
                               });
}

}  // namespace

Tensor crop2d(const Tensor& input, std::size_t top, std::size_t left) {
    return spatial_select(input, top, left, 1, "crop2d");
}

Tensor subsample2d(const Tensor& input, std::size_t stride) {
    require(stride >= 1, "subsample2d: stride must be >= 1");
    return spatial_select(input, 0, 0, stride, "subsample2d");
}

}  // namespace hypernas
