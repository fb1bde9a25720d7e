#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "semihmer/tensor.hpp"

namespace semihmer {

// A named trainable tensor with a persistent gradient accumulator.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor(value.dims());
    }
    void zero_grad() { grad.zero(); }
};

struct Var {
    int i = -1;
    bool valid() const { return i >= 0; }
};

// Reverse-mode tape. Nodes are created in topological order by the op
// builders below; backward() sweeps them in reverse. One tape per sample,
// discarded after the gradient step.
class Tape {
public:
    struct Node {
        Tensor val;
        Tensor grad;
        std::function<void(Tape&)> backward;  // null for constants
        Param* leaf = nullptr;                // set for parameter leaves
    };

    std::vector<Node> nodes;

    const Tensor& val(Var v) const { return nodes[static_cast<size_t>(v.i)].val; }
    Tensor& grad(Var v) { return nodes[static_cast<size_t>(v.i)].grad; }

    Var constant(Tensor t) {
        return push(std::move(t), nullptr);
    }

    // Cached per tape: the same Param used at every decoder step maps to a
    // single leaf node, so its gradient accumulates in one place.
    Var param(Param& p) {
        auto it = param_nodes_.find(&p);
        if (it != param_nodes_.end()) return it->second;
        Var v = push(p.value, nullptr);
        nodes.back().leaf = &p;
        param_nodes_.emplace(&p, v);
        return v;
    }

    // ---- elementwise ----

    Var add(Var a, Var b) { return axpby(a, b, 1.0, 1.0); }
    Var sub(Var a, Var b) { return axpby(a, b, 1.0, -1.0); }

    Var axpby(Var a, Var b, double alpha, double beta) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (!ta.same_shape(tb)) fail("axpby: shape mismatch");
        Tensor out(ta.dims());
        for (long long i = 0; i < ta.numel(); ++i)
            out[i] = alpha * ta[i] + beta * tb[i];
        return push(std::move(out), [a, b, alpha, beta](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            Tensor& ga = t.grad(a);
            Tensor& gb = t.grad(b);
            for (long long i = 0; i < g.numel(); ++i) {
                ga[i] += alpha * g[i];
                gb[i] += beta * g[i];
            }
        });
    }

    Var mul(Var a, Var b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (!ta.same_shape(tb)) fail("mul: shape mismatch");
        Tensor out(ta.dims());
        for (long long i = 0; i < ta.numel(); ++i) out[i] = ta[i] * tb[i];
        return push(std::move(out), [a, b](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            const Tensor& ta = t.val(a);
            const Tensor& tb = t.val(b);
            Tensor& ga = t.grad(a);
            Tensor& gb = t.grad(b);
            for (long long i = 0; i < g.numel(); ++i) {
                ga[i] += g[i] * tb[i];
                gb[i] += g[i] * ta[i];
            }
        });
    }

    Var scale(Var a, double c) {
        const Tensor& ta = val(a);
        Tensor out(ta.dims());
        for (long long i = 0; i < ta.numel(); ++i) out[i] = c * ta[i];
        return push(std::move(out), [a, c](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            Tensor& ga = t.grad(a);
            for (long long i = 0; i < g.numel(); ++i) ga[i] += c * g[i];
        });
    }

    Var add_scalar(Var a, double c) {
        const Tensor& ta = val(a);
        Tensor out(ta.dims());
        for (long long i = 0; i < ta.numel(); ++i) out[i] = ta[i] + c;
        return push(std::move(out), [a](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            Tensor& ga = t.grad(a);
            for (long long i = 0; i < g.numel(); ++i) ga[i] += g[i];
        });
    }

    Var relu(Var a) {
        const Tensor& ta = val(a);
        Tensor out(ta.dims());
        for (long long i = 0; i < ta.numel(); ++i) out[i] = ta[i] > 0.0 ? ta[i] : 0.0;
        return push(std::move(out), [a](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            const Tensor& ta = t.val(a);
            Tensor& ga = t.grad(a);
            for (long long i = 0; i < g.numel(); ++i)
                if (ta[i] > 0.0) ga[i] += g[i];
        });
    }

    Var sigmoid(Var a) {
        const Tensor& ta = val(a);
        Tensor out(ta.dims());
        for (long long i = 0; i < ta.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-ta[i]));
        return push(std::move(out), [a](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            const Tensor& y = t.val(t.last_);
            Tensor& ga = t.grad(a);
            for (long long i = 0; i < g.numel(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
        });
    }

    Var tanh_(Var a) {
        const Tensor& ta = val(a);
        Tensor out(ta.dims());
        for (long long i = 0; i < ta.numel(); ++i) out[i] = std::tanh(ta[i]);
        return push(std::move(out), [a](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            const Tensor& y = t.val(t.last_);
            Tensor& ga = t.grad(a);
            for (long long i = 0; i < g.numel(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
        });
    }

    // ---- vectors / linear algebra ----

    // W (m,n) times x (n) -> (m)
    Var matvec(Var w, Var x) {
        const Tensor& tw = val(w);
        const Tensor& tx = val(x);
        if (tw.ndim() != 2 || tx.ndim() != 1 || tw.dim(1) != tx.dim(0))
            fail("matvec: shape mismatch");
        const int m = tw.dim(0), n = tw.dim(1);
        Tensor out({m});
        const double* wp = tw.data();
        const double* xp = tx.data();
        for (int i = 0; i < m; ++i) {
            double s = 0.0;
            const double* row = wp + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) s += row[j] * xp[j];
            out.at(i) = s;
        }
        return push(std::move(out), [w, x, m, n](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            const Tensor& tw = t.val(w);
            const Tensor& tx = t.val(x);
            Tensor& gw = t.grad(w);
            Tensor& gx = t.grad(x);
            for (int i = 0; i < m; ++i) {
                const double gi = g.at(i);
                if (gi == 0.0) continue;
                double* gwrow = gw.data() + static_cast<size_t>(i) * n;
                const double* wrow = tw.data() + static_cast<size_t>(i) * n;
                for (int j = 0; j < n; ++j) {
                    gwrow[j] += gi * tx.at(j);
                    gx.at(j) += gi * wrow[j];
                }
            }
        });
    }

    Var concat_vec(Var a, Var b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (ta.ndim() != 1 || tb.ndim() != 1) fail("concat_vec: rank != 1");
        const int na = ta.dim(0), nb = tb.dim(0);
        Tensor out({na + nb});
        for (int i = 0; i < na; ++i) out.at(i) = ta.at(i);
        for (int i = 0; i < nb; ++i) out.at(na + i) = tb.at(i);
        return push(std::move(out), [a, b, na, nb](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            Tensor& ga = t.grad(a);
            Tensor& gb = t.grad(b);
            for (int i = 0; i < na; ++i) ga.at(i) += g.at(i);
            for (int i = 0; i < nb; ++i) gb.at(i) += g.at(na + i);
        });
    }

    // row idx of an embedding table (C, d) -> (d)
    Var row(Var table, int idx) {
        const Tensor& tt = val(table);
        if (tt.ndim() != 2 || idx < 0 || idx >= tt.dim(0)) fail("row: bad index");
        const int d = tt.dim(1);
        Tensor out({d});
        for (int j = 0; j < d; ++j) out.at(j) = tt.at(idx, j);
        return push(std::move(out), [table, idx, d](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            Tensor& gt = t.grad(table);
            for (int j = 0; j < d; ++j) gt.at(idx, j) += g.at(j);
        });
    }

    Var softmax_vec(Var a) {
        const Tensor& ta = val(a);
        if (ta.ndim() != 1) fail("softmax_vec: rank != 1");
        const int n = ta.dim(0);
        Tensor out({n});
        double m = ta.max();
        double z = 0.0;
        for (int i = 0; i < n; ++i) {
            out.at(i) = std::exp(ta.at(i) - m);
            z += out.at(i);
        }
        for (int i = 0; i < n; ++i) out.at(i) /= z;
        return push(std::move(out), [a, n](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            const Tensor& s = t.val(t.last_);
            Tensor& ga = t.grad(a);
            double dot = 0.0;
            for (int i = 0; i < n; ++i) dot += g.at(i) * s.at(i);
            for (int i = 0; i < n; ++i) ga.at(i) += s.at(i) * (g.at(i) - dot);
        });
    }

    // Numerically stable -log softmax(logits)[target]; scalar output.
    Var ce_logits(Var logits, int target) {
        const Tensor& tl = val(logits);
        if (tl.ndim() != 1 || target < 0 || target >= tl.dim(0)) fail("ce_logits: bad target");
        const int n = tl.dim(0);
        double m = tl.max();
        double z = 0.0;
        for (int i = 0; i < n; ++i) z += std::exp(tl.at(i) - m);
        double lse = m + std::log(z);
        Tensor out = Tensor::scalar(lse - tl.at(target));
        return push(std::move(out), [logits, target, n, m, z](Tape& t) {
            const double g = t.grad(t.last_)[0];
            const Tensor& tl = t.val(logits);
            Tensor& gl = t.grad(logits);
            for (int i = 0; i < n; ++i) {
                double p = std::exp(tl.at(i) - m) / z;
                gl.at(i) += g * (p - (i == target ? 1.0 : 0.0));
            }
        });
    }

    Var sum_scalars(const std::vector<Var>& xs) {
        double s = 0.0;
        for (Var v : xs) {
            if (val(v).ndim() != 0) fail("sum_scalars: non-scalar input");
            s += val(v)[0];
        }
        std::vector<Var> captured = xs;
        return push(Tensor::scalar(s), [captured](Tape& t) {
            const double g = t.grad(t.last_)[0];
            for (Var v : captured) t.grad(v)[0] += g;
        });
    }

    Var mean_scalars(const std::vector<Var>& xs) {
        if (xs.empty()) fail("mean_scalars: empty");
        return scale(sum_scalars(xs), 1.0 / static_cast<double>(xs.size()));
    }

    // ---- spatial ops; feature maps are (C, H, W) ----

    Var concat_ch(Var a, Var b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (ta.ndim() != 3 || tb.ndim() != 3 || ta.dim(1) != tb.dim(1) || ta.dim(2) != tb.dim(2))
            fail("concat_ch: shape mismatch");
        const int ca = ta.dim(0), cb = tb.dim(0), h = ta.dim(1), w = ta.dim(2);
        Tensor out({ca + cb, h, w});
        const size_t plane = static_cast<size_t>(h) * w;
        std::copy(ta.data(), ta.data() + static_cast<size_t>(ca) * plane, out.data());
        std::copy(tb.data(), tb.data() + static_cast<size_t>(cb) * plane,
                  out.data() + static_cast<size_t>(ca) * plane);
        return push(std::move(out), [a, b, ca, cb, plane](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            Tensor& ga = t.grad(a);
            Tensor& gb = t.grad(b);
            const double* gp = g.data();
            for (size_t i = 0; i < static_cast<size_t>(ca) * plane; ++i) ga.data()[i] += gp[i];
            gp += static_cast<size_t>(ca) * plane;
            for (size_t i = 0; i < static_cast<size_t>(cb) * plane; ++i) gb.data()[i] += gp[i];
        });
    }

    // x (Ci,H,W) conv weight (Co,Ci,kh,kw), optional bias (Co), zero padding.
    Var conv2d(Var x, Var w, Var b, int stride, int pad) {
        const Tensor& tx = val(x);
        const Tensor& tw = val(w);
        if (tx.ndim() != 3 || tw.ndim() != 4 || tw.dim(1) != tx.dim(0))
            fail("conv2d: shape mismatch");
        const int ci = tx.dim(0), h = tx.dim(1), wd = tx.dim(2);
        const int co = tw.dim(0), kh = tw.dim(2), kw = tw.dim(3);
        const int ho = (h + 2 * pad - kh) / stride + 1;
        const int wo = (wd + 2 * pad - kw) / stride + 1;
        if (ho <= 0 || wo <= 0) fail("conv2d: output would be empty");
        Tensor out({co, ho, wo});
        const bool has_bias = b.valid();

        for (int oc = 0; oc < co; ++oc) {
            const double bias = has_bias ? val(b).at(oc) : 0.0;
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox) out.at(oc, oy, ox) = bias;
            }
            for (int ic = 0; ic < ci; ++ic) {
                for (int ky = 0; ky < kh; ++ky) {
                    for (int kx = 0; kx < kw; ++kx) {
                        const double wv = tw.at(oc, ic, ky, kx);
                        if (wv == 0.0) continue;
                        for (int oy = 0; oy < ho; ++oy) {
                            const int iy = oy * stride - pad + ky;
                            if (iy < 0 || iy >= h) continue;
                            const double* xrow = tx.data() + (static_cast<size_t>(ic) * h + iy) * wd;
                            double* orow = out.data() + (static_cast<size_t>(oc) * ho + oy) * wo;
                            for (int ox = 0; ox < wo; ++ox) {
                                const int ix = ox * stride - pad + kx;
                                if (ix < 0 || ix >= wd) continue;
                                orow[ox] += wv * xrow[ix];
                            }
                        }
                    }
                }
            }
        }
        return push(std::move(out),
                    [x, w, b, stride, pad, ci, h, wd, co, kh, kw, ho, wo, has_bias](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            const Tensor& tx = t.val(x);
            const Tensor& tw = t.val(w);
            Tensor& gx = t.grad(x);
            Tensor& gw = t.grad(w);
            for (int oc = 0; oc < co; ++oc) {
                if (has_bias) {
                    double s = 0.0;
                    const double* gp = g.data() + static_cast<size_t>(oc) * ho * wo;
                    for (int i = 0; i < ho * wo; ++i) s += gp[i];
                    t.grad(b).at(oc) += s;
                }
                for (int ic = 0; ic < ci; ++ic) {
                    for (int ky = 0; ky < kh; ++ky) {
                        for (int kx = 0; kx < kw; ++kx) {
                            const double wv = tw.at(oc, ic, ky, kx);
                            double wacc = 0.0;
                            for (int oy = 0; oy < ho; ++oy) {
                                const int iy = oy * stride - pad + ky;
                                if (iy < 0 || iy >= h) continue;
                                const double* xrow =
                                    tx.data() + (static_cast<size_t>(ic) * h + iy) * wd;
                                double* gxrow =
                                    gx.data() + (static_cast<size_t>(ic) * h + iy) * wd;
                                const double* grow =
                                    g.data() + (static_cast<size_t>(oc) * ho + oy) * wo;
                                for (int ox = 0; ox < wo; ++ox) {
                                    const int ix = ox * stride - pad + kx;
                                    if (ix < 0 || ix >= wd) continue;
                                    const double gv = grow[ox];
                                    wacc += gv * xrow[ix];
                                    gxrow[ix] += gv * wv;
                                }
                            }
                            gw.at(oc, ic, ky, kx) += wacc;
                        }
                    }
                }
            }
        });
    }

    // Ceil-mode average pooling with fixed divisor k*k; out-of-range taps
    // count as zero, which keeps padded and unpadded runs bit-compatible.
    Var avgpool2d(Var x, int k, int stride) {
        const Tensor& tx = val(x);
        if (tx.ndim() != 3) fail("avgpool2d: rank != 3");
        const int c = tx.dim(0), h = tx.dim(1), w = tx.dim(2);
        const int ho = (h + stride - 1) / stride;
        const int wo = (w + stride - 1) / stride;
        const double inv = 1.0 / (k * k);
        Tensor out({c, ho, wo});
        for (int ic = 0; ic < c; ++ic)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    double s = 0.0;
                    for (int dy = 0; dy < k; ++dy) {
                        const int iy = oy * stride + dy;
                        if (iy >= h) break;
                        for (int dx = 0; dx < k; ++dx) {
                            const int ix = ox * stride + dx;
                            if (ix >= w) break;
                            s += tx.at(ic, iy, ix);
                        }
                    }
                    out.at(ic, oy, ox) = s * inv;
                }
        return push(std::move(out), [x, k, stride, c, h, w, ho, wo, inv](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            Tensor& gx = t.grad(x);
            for (int ic = 0; ic < c; ++ic)
                for (int oy = 0; oy < ho; ++oy)
                    for (int ox = 0; ox < wo; ++ox) {
                        const double gv = g.at(ic, oy, ox) * inv;
                        if (gv == 0.0) continue;
                        for (int dy = 0; dy < k; ++dy) {
                            const int iy = oy * stride + dy;
                            if (iy >= h) break;
                            for (int dx = 0; dx < k; ++dx) {
                                const int ix = ox * stride + dx;
                                if (ix >= w) break;
                                gx.at(ic, iy, ix) += gv;
                            }
                        }
                    }
        });
    }

    // x (C,H,W) * mask (H,W), broadcast over channels. mask is plain data.
    Var mul_mask(Var x, const Tensor& mask) {
        const Tensor& tx = val(x);
        if (tx.ndim() != 3 || mask.ndim() != 2 || tx.dim(1) != mask.dim(0) ||
            tx.dim(2) != mask.dim(1))
            fail("mul_mask: shape mismatch");
        const int c = tx.dim(0);
        const size_t plane = static_cast<size_t>(mask.numel());
        Tensor out(tx.dims());
        for (int ic = 0; ic < c; ++ic) {
            const double* xp = tx.data() + ic * plane;
            double* op = out.data() + ic * plane;
            for (size_t i = 0; i < plane; ++i) op[i] = xp[i] * mask.data()[i];
        }
        Tensor m = mask;
        return push(std::move(out), [x, c, plane, m = std::move(m)](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            Tensor& gx = t.grad(x);
            for (int ic = 0; ic < c; ++ic) {
                const double* gp = g.data() + ic * plane;
                double* gxp = gx.data() + ic * plane;
                for (size_t i = 0; i < plane; ++i) gxp[i] += gp[i] * m.data()[i];
            }
        });
    }

    Var add_cvec(Var x, Var v) {
        const Tensor& tx = val(x);
        const Tensor& tv = val(v);
        if (tx.ndim() != 3 || tv.ndim() != 1 || tv.dim(0) != tx.dim(0))
            fail("add_cvec: shape mismatch");
        const int c = tx.dim(0);
        const size_t plane = static_cast<size_t>(tx.dim(1)) * tx.dim(2);
        Tensor out(tx.dims());
        for (int ic = 0; ic < c; ++ic) {
            const double b = tv.at(ic);
            const double* xp = tx.data() + ic * plane;
            double* op = out.data() + ic * plane;
            for (size_t i = 0; i < plane; ++i) op[i] = xp[i] + b;
        }
        return push(std::move(out), [x, v, c, plane](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            Tensor& gx = t.grad(x);
            Tensor& gv = t.grad(v);
            for (int ic = 0; ic < c; ++ic) {
                const double* gp = g.data() + ic * plane;
                double* gxp = gx.data() + ic * plane;
                double s = 0.0;
                for (size_t i = 0; i < plane; ++i) {
                    gxp[i] += gp[i];
                    s += gp[i];
                }
                gv.at(ic) += s;
            }
        });
    }

    // Per-channel sum of x over mask==1 positions -> (C).
    Var masked_sum_spatial(Var x, const Tensor& mask) {
        const Tensor& tx = val(x);
        if (tx.ndim() != 3 || mask.ndim() != 2 || tx.dim(1) != mask.dim(0) ||
            tx.dim(2) != mask.dim(1))
            fail("masked_sum_spatial: shape mismatch");
        const int c = tx.dim(0);
        const size_t plane = static_cast<size_t>(mask.numel());
        Tensor out({c});
        for (int ic = 0; ic < c; ++ic) {
            const double* xp = tx.data() + ic * plane;
            double s = 0.0;
            for (size_t i = 0; i < plane; ++i) s += xp[i] * mask.data()[i];
            out.at(ic) = s;
        }
        Tensor m = mask;
        return push(std::move(out), [x, c, plane, m = std::move(m)](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            Tensor& gx = t.grad(x);
            for (int ic = 0; ic < c; ++ic) {
                const double gv = g.at(ic);
                if (gv == 0.0) continue;
                double* gxp = gx.data() + ic * plane;
                for (size_t i = 0; i < plane; ++i) gxp[i] += gv * m.data()[i];
            }
        });
    }

    // Masked per-channel normalization with affine parameters. Statistics
    // use valid positions only; outputs at masked-out positions are zero.
    Var masked_instance_norm(Var x, const Tensor& mask, Var gamma, Var beta, double eps = 1e-5) {
        const Tensor& tx = val(x);
        if (tx.ndim() != 3 || mask.ndim() != 2) fail("masked_instance_norm: bad ranks");
        const int c = tx.dim(0);
        const size_t plane = static_cast<size_t>(mask.numel());
        double n = 0.0;
        for (size_t i = 0; i < plane; ++i) n += mask.data()[i];
        if (n < 1.0) fail("masked_instance_norm: empty mask");

        Tensor mu({c}), inv({c});
        Tensor out(tx.dims());
        for (int ic = 0; ic < c; ++ic) {
            const double* xp = tx.data() + ic * plane;
            double s = 0.0;
            for (size_t i = 0; i < plane; ++i) s += xp[i] * mask.data()[i];
            const double m = s / n;
            double v = 0.0;
            for (size_t i = 0; i < plane; ++i) {
                const double d = (xp[i] - m) * mask.data()[i];
                v += d * d;
            }
            v /= n;
            const double iv = 1.0 / std::sqrt(v + eps);
            mu.at(ic) = m;
            inv.at(ic) = iv;
            const double gm = val(gamma).at(ic);
            const double bt = val(beta).at(ic);
            double* op = out.data() + ic * plane;
            for (size_t i = 0; i < plane; ++i)
                op[i] = mask.data()[i] * (gm * (xp[i] - m) * iv + bt);
        }
        Tensor msk = mask;
        return push(std::move(out), [x, gamma, beta, c, plane, n, mu = std::move(mu),
                                     inv = std::move(inv), msk = std::move(msk)](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            const Tensor& tx = t.val(x);
            Tensor& gx = t.grad(x);
            Tensor& gg = t.grad(gamma);
            Tensor& gb = t.grad(beta);
            for (int ic = 0; ic < c; ++ic) {
                const double m = mu.at(ic);
                const double iv = inv.at(ic);
                const double gm = t.val(gamma).at(ic);
                const double* xp = tx.data() + ic * plane;
                const double* gp = g.data() + ic * plane;
                double* gxp = gx.data() + ic * plane;
                double sum_g = 0.0, sum_gxhat = 0.0;
                for (size_t i = 0; i < plane; ++i) {
                    if (msk.data()[i] == 0.0) continue;
                    const double xhat = (xp[i] - m) * iv;
                    sum_g += gp[i];
                    sum_gxhat += gp[i] * xhat;
                }
                gg.at(ic) += sum_gxhat;
                gb.at(ic) += sum_g;
                const double k1 = gm * iv;
                for (size_t i = 0; i < plane; ++i) {
                    if (msk.data()[i] == 0.0) continue;
                    const double xhat = (xp[i] - m) * iv;
                    gxp[i] += k1 * (gp[i] - sum_g / n - xhat * sum_gxhat / n);
                }
            }
        });
    }

    // Softmax of a (H,W) score map over mask==1 positions; zeros elsewhere.
    Var masked_softmax2d(Var score, const Tensor& mask) {
        const Tensor& ts = val(score);
        if (ts.ndim() != 2 || !ts.same_shape(mask)) fail("masked_softmax2d: shape mismatch");
        const size_t plane = static_cast<size_t>(ts.numel());
        double m = -1e300;
        bool any = false;
        for (size_t i = 0; i < plane; ++i)
            if (mask.data()[i] != 0.0) {
                m = std::max(m, ts.data()[i]);
                any = true;
            }
        if (!any) fail("masked_softmax2d: empty mask");
        Tensor out(ts.dims());
        double z = 0.0;
        for (size_t i = 0; i < plane; ++i) {
            if (mask.data()[i] != 0.0) {
                out.data()[i] = std::exp(ts.data()[i] - m);
                z += out.data()[i];
            }
        }
        for (size_t i = 0; i < plane; ++i) out.data()[i] /= z;
        Tensor msk = mask;
        return push(std::move(out), [score, plane, msk = std::move(msk)](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            const Tensor& a = t.val(t.last_);
            Tensor& gs = t.grad(score);
            double dot = 0.0;
            for (size_t i = 0; i < plane; ++i) dot += g.data()[i] * a.data()[i];
            for (size_t i = 0; i < plane; ++i)
                if (msk.data()[i] != 0.0)
                    gs.data()[i] += a.data()[i] * (g.data()[i] - dot);
        });
    }

    // context[d] = sum_{h,w} attn[h,w] * features[d,h,w]
    Var attn_context(Var features, Var attn) {
        const Tensor& tf = val(features);
        const Tensor& ta = val(attn);
        if (tf.ndim() != 3 || ta.ndim() != 2 || tf.dim(1) != ta.dim(0) || tf.dim(2) != ta.dim(1))
            fail("attn_context: shape mismatch");
        const int d = tf.dim(0);
        const size_t plane = static_cast<size_t>(ta.numel());
        Tensor out({d});
        for (int ic = 0; ic < d; ++ic) {
            const double* fp = tf.data() + ic * plane;
            double s = 0.0;
            for (size_t i = 0; i < plane; ++i) s += fp[i] * ta.data()[i];
            out.at(ic) = s;
        }
        return push(std::move(out), [features, attn, d, plane](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            const Tensor& tf = t.val(features);
            const Tensor& ta = t.val(attn);
            Tensor& gf = t.grad(features);
            Tensor& ga = t.grad(attn);
            for (int ic = 0; ic < d; ++ic) {
                const double gv = g.at(ic);
                if (gv == 0.0) continue;
                const double* fp = tf.data() + ic * plane;
                double* gfp = gf.data() + ic * plane;
                for (size_t i = 0; i < plane; ++i) {
                    gfp[i] += gv * ta.data()[i];
                    ga.data()[i] += gv * fp[i];
                }
            }
        });
    }

    // Same entries, new dims; numel must match.
    Var reshape(Var x, std::vector<int> dims) {
        const Tensor& tx = val(x);
        Tensor out(dims);
        if (out.numel() != tx.numel()) fail("reshape: element count mismatch");
        for (long long i = 0; i < tx.numel(); ++i) out[i] = tx[i];
        return push(std::move(out), [x](Tape& t) {
            const Tensor& g = t.grad(t.last_);
            Tensor& gx = t.grad(x);
            for (long long i = 0; i < gx.numel(); ++i) gx[i] += g[i];
        });
    }

    // Sum of all entries -> scalar.
    Var sum_all(Var x) {
        const Tensor& tx = val(x);
        double s = 0.0;
        for (long long i = 0; i < tx.numel(); ++i) s += tx[i];
        return push(Tensor::scalar(s), [x](Tape& t) {
            const double g = t.grad(t.last_)[0];
            Tensor& gx = t.grad(x);
            for (long long i = 0; i < gx.numel(); ++i) gx[i] += g;
        });
    }

    // mean over classes of smooth-L1(pred - target); target is plain data.
    Var smooth_l1_mean(Var pred, const Tensor& target) {
        const Tensor& tp = val(pred);
        if (!tp.same_shape(target)) fail("smooth_l1_mean: shape mismatch");
        const long long n = tp.numel();
        double s = 0.0;
        for (long long i = 0; i < n; ++i) {
            const double x = tp[i] - target[i];
            const double ax = std::fabs(x);
            s += ax < 1.0 ? 0.5 * x * x : ax - 0.5;
        }
        Tensor tgt = target;
        return push(Tensor::scalar(s / static_cast<double>(n)),
                    [pred, n, tgt = std::move(tgt)](Tape& t) {
            const double g = t.grad(t.last_)[0] / static_cast<double>(n);
            const Tensor& tp = t.val(pred);
            Tensor& gp = t.grad(pred);
            for (long long i = 0; i < n; ++i) {
                const double x = tp[i] - tgt[i];
                gp[i] += g * (std::fabs(x) < 1.0 ? x : (x > 0.0 ? 1.0 : -1.0));
            }
        });
    }

    // ---- backward ----

    void backward(Var root) {
        Node& r = nodes[static_cast<size_t>(root.i)];
        if (r.val.ndim() != 0) fail("backward: root must be scalar");
        r.grad[0] = 1.0;
        for (int i = static_cast<int>(nodes.size()) - 1; i >= 0; --i) {
            Node& nd = nodes[static_cast<size_t>(i)];
            if (nd.backward) {
                last_.i = i;
                nd.backward(*this);
            }
        }
        for (Node& nd : nodes) {
            if (nd.leaf) {
                Tensor& pg = nd.leaf->grad;
                for (long long i = 0; i < pg.numel(); ++i) pg[i] += nd.grad[i];
            }
        }
    }

private:
    Var push(Tensor val, std::function<void(Tape&)> bw) {
        Node nd;
        nd.grad = Tensor(val.dims());
        nd.val = std::move(val);
        nd.backward = std::move(bw);
        nodes.push_back(std::move(nd));
        return Var{static_cast<int>(nodes.size()) - 1};
    }

    // Index of the node whose backward is currently running; closures use it
    // to reach their own output grad without capturing a self-reference.
    Var last_{-1};

    std::unordered_map<Param*, Var> param_nodes_;
};

}  // namespace semihmer
