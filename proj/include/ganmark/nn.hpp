#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "ganmark/rng.hpp"
#include "ganmark/tensor.hpp"

namespace ganmark::nn {

using ganmark::Rng;
using ganmark::Tensor;

template <class T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <class T>
struct Param {
    Tensor<T> value;
    Tensor<T> grad;

    explicit Param(Tensor<T> v) : value(std::move(v)), grad(value.shape) {}
};

template <class T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor<T> forward(const Tensor<T>& x) = 0;
    virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
    virtual std::vector<Param<T>*> params() { return {}; }
    virtual void set_train(bool) {}
};

template <class T>
class Linear : public Layer<T> {
public:
    Linear(int in, int out, Rng& rng)
        : in_(in), out_(out), w_(Tensor<T>({out, in})), b_(Tensor<T>({out})) {
        T s = static_cast<T>(std::sqrt(2.0 / in));
        for (auto& v : w_.value.data) v = static_cast<T>(rng.normal()) * s;
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        if (x.rank() != 2 || x.dim(1) != in_)
            throw std::invalid_argument("Linear: input shape mismatch");
        x_ = x;
        const int n = x.dim(0);
        Tensor<T> y({n, out_});
        ConstMatMap<T> X(x.ptr(), n, in_), W(w_.value.ptr(), out_, in_);
        MatMap<T> Y(y.ptr(), n, out_);
        Y.noalias() = X * W.transpose();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < out_; ++j) y.data[static_cast<size_t>(i) * out_ + j] += b_.value.data[j];
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        const int n = x_.dim(0);
        Tensor<T> gx({n, in_});
        ConstMatMap<T> GY(gy.ptr(), n, out_), X(x_.ptr(), n, in_), W(w_.value.ptr(), out_, in_);
        MatMap<T> GX(gx.ptr(), n, in_), GW(w_.grad.ptr(), out_, in_);
        GX.noalias() = GY * W;
        GW.noalias() += GY.transpose() * X;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < out_; ++j) b_.grad.data[j] += gy.data[static_cast<size_t>(i) * out_ + j];
        return gx;
    }

    std::vector<Param<T>*> params() override { return {&w_, &b_}; }

private:
    int in_, out_;
    Param<T> w_, b_;
    Tensor<T> x_;
};

// Zero-padded strided 2-D convolution, im2col + GEMM.
template <class T>
class Conv2d : public Layer<T> {
public:
    Conv2d(int cin, int cout, int k, int stride, int pad, Rng& rng)
        : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad),
          w_(Tensor<T>({cout, cin * k * k})), b_(Tensor<T>({cout})) {
        T s = static_cast<T>(std::sqrt(2.0 / (cin * k * k)));
        for (auto& v : w_.value.data) v = static_cast<T>(rng.normal()) * s;
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        if (x.rank() != 4 || x.dim(1) != cin_)
            throw std::invalid_argument("Conv2d: input shape mismatch");
        x_ = x;
        const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
        ho_ = (h + 2 * pad_ - k_) / stride_ + 1;
        wo_ = (w + 2 * pad_ - k_) / stride_ + 1;
        const int cols = ho_ * wo_, rows = cin_ * k_ * k_;
        cols_.assign(static_cast<size_t>(n) * rows * cols, T(0));
        Tensor<T> y({n, cout_, ho_, wo_});
        ConstMatMap<T> W(w_.value.ptr(), cout_, rows);
        for (int img = 0; img < n; ++img) {
            T* col = cols_.data() + static_cast<size_t>(img) * rows * cols;
            im2col(x.ptr() + static_cast<size_t>(img) * cin_ * h * w, h, w, col);
            MatMap<T> Y(y.ptr() + static_cast<size_t>(img) * cout_ * cols, cout_, cols);
            ConstMatMap<T> Col(col, rows, cols);
            Y.noalias() = W * Col;
            for (int c = 0; c < cout_; ++c) Y.row(c).array() += b_.value.data[c];
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
        const int cols = ho_ * wo_, rows = cin_ * k_ * k_;
        Tensor<T> gx(x_.shape);
        MatMap<T> GW(w_.grad.ptr(), cout_, rows);
        ConstMatMap<T> W(w_.value.ptr(), cout_, rows);
        std::vector<T> gcol(static_cast<size_t>(rows) * cols);
        for (int img = 0; img < n; ++img) {
            ConstMatMap<T> GY(gy.ptr() + static_cast<size_t>(img) * cout_ * cols, cout_, cols);
            ConstMatMap<T> Col(cols_.data() + static_cast<size_t>(img) * rows * cols, rows, cols);
            GW.noalias() += GY * Col.transpose();
            for (int c = 0; c < cout_; ++c) b_.grad.data[c] += GY.row(c).sum();
            MatMap<T> GCol(gcol.data(), rows, cols);
            GCol.noalias() = W.transpose() * GY;
            col2im(gcol.data(), h, w, gx.ptr() + static_cast<size_t>(img) * cin_ * h * w);
        }
        return gx;
    }

    std::vector<Param<T>*> params() override { return {&w_, &b_}; }

private:
    void im2col(const T* src, int h, int w, T* col) const {
        const int cols = ho_ * wo_;
        int r = 0;
        for (int c = 0; c < cin_; ++c) {
            const T* plane = src + static_cast<size_t>(c) * h * w;
            for (int ki = 0; ki < k_; ++ki) {
                for (int kj = 0; kj < k_; ++kj, ++r) {
                    T* dst = col + static_cast<size_t>(r) * cols;
                    for (int oi = 0; oi < ho_; ++oi) {
                        int ii = oi * stride_ - pad_ + ki;
                        for (int oj = 0; oj < wo_; ++oj) {
                            int jj = oj * stride_ - pad_ + kj;
                            dst[oi * wo_ + oj] =
                                (ii >= 0 && ii < h && jj >= 0 && jj < w) ? plane[ii * w + jj] : T(0);
                        }
                    }
                }
            }
        }
    }

    void col2im(const T* col, int h, int w, T* dst) const {
        const int cols = ho_ * wo_;
        int r = 0;
        for (int c = 0; c < cin_; ++c) {
            T* plane = dst + static_cast<size_t>(c) * h * w;
            for (int ki = 0; ki < k_; ++ki) {
                for (int kj = 0; kj < k_; ++kj, ++r) {
                    const T* src = col + static_cast<size_t>(r) * cols;
                    for (int oi = 0; oi < ho_; ++oi) {
                        int ii = oi * stride_ - pad_ + ki;
                        if (ii < 0 || ii >= h) continue;
                        for (int oj = 0; oj < wo_; ++oj) {
                            int jj = oj * stride_ - pad_ + kj;
                            if (jj >= 0 && jj < w) plane[ii * w + jj] += src[oi * wo_ + oj];
                        }
                    }
                }
            }
        }
    }

    int cin_, cout_, k_, stride_, pad_;
    int ho_ = 0, wo_ = 0;
    Param<T> w_, b_;
    Tensor<T> x_;
    std::vector<T> cols_;
};

template <class T>
class BatchNorm2d : public Layer<T> {
public:
    explicit BatchNorm2d(int channels, T momentum = T(0.9), T eps = T(1e-5))
        : c_(channels), momentum_(momentum), eps_(eps),
          gamma_(Tensor<T>::full({channels}, T(1))), beta_(Tensor<T>({channels})),
          run_mean_({channels}), run_var_(Tensor<T>::full({channels}, T(1))) {}

    Tensor<T> forward(const Tensor<T>& x) override {
        if (x.rank() != 4 || x.dim(1) != c_)
            throw std::invalid_argument("BatchNorm2d: input shape mismatch");
        const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
        const int64_t m = static_cast<int64_t>(n) * h * w;
        x_ = x;
        xhat_ = Tensor<T>(x.shape);
        mean_.assign(c_, T(0));
        ivar_.assign(c_, T(0));
        Tensor<T> y(x.shape);
        for (int c = 0; c < c_; ++c) {
            double mu = 0, var = 0;
            for_each_ch(x, c, [&](T v) { mu += v; });
            mu /= static_cast<double>(m);
            for_each_ch(x, c, [&](T v) { var += (v - mu) * (v - mu); });
            var /= static_cast<double>(m);
            T use_mu, use_iv;
            if (train_) {
                mean_[c] = static_cast<T>(mu);
                ivar_[c] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps_)));
                run_mean_.data[c] = momentum_ * run_mean_.data[c] + (1 - momentum_) * static_cast<T>(mu);
                run_var_.data[c] = momentum_ * run_var_.data[c] + (1 - momentum_) * static_cast<T>(var);
                use_mu = mean_[c];
                use_iv = ivar_[c];
            } else {
                use_mu = run_mean_.data[c];
                use_iv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(run_var_.data[c]) +
                                                        static_cast<double>(eps_)));
                ivar_[c] = use_iv;
            }
            const T g = gamma_.value.data[c], b = beta_.value.data[c];
            for (int img = 0; img < n; ++img) {
                for (int i = 0; i < h; ++i) {
                    for (int j = 0; j < w; ++j) {
                        T xh = (x.at4(img, c, i, j) - use_mu) * use_iv;
                        xhat_.at4(img, c, i, j) = xh;
                        y.at4(img, c, i, j) = g * xh + b;
                    }
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
        const double m = static_cast<double>(n) * h * w;
        Tensor<T> gx(x_.shape);
        for (int c = 0; c < c_; ++c) {
            const T g = gamma_.value.data[c], iv = ivar_[c];
            double sum_gy = 0, sum_gy_xhat = 0;
            for (int img = 0; img < n; ++img)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) {
                        double gyv = gy.at4(img, c, i, j);
                        sum_gy += gyv;
                        sum_gy_xhat += gyv * xhat_.at4(img, c, i, j);
                    }
            gamma_.grad.data[c] += static_cast<T>(sum_gy_xhat);
            beta_.grad.data[c] += static_cast<T>(sum_gy);
            for (int img = 0; img < n; ++img)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) {
                        double gyv = gy.at4(img, c, i, j);
                        double xh = xhat_.at4(img, c, i, j);
                        double dx;
                        if (train_)
                            dx = (g * iv) * (gyv - sum_gy / m - xh * sum_gy_xhat / m);
                        else
                            dx = g * iv * gyv;  // running stats are constants in eval mode
                        gx.at4(img, c, i, j) = static_cast<T>(dx);
                    }
        }
        return gx;
    }

    std::vector<Param<T>*> params() override { return {&gamma_, &beta_}; }
    void set_train(bool t) override { train_ = t; }

    Tensor<T>& running_mean() { return run_mean_; }
    Tensor<T>& running_var() { return run_var_; }

private:
    template <class F>
    void for_each_ch(const Tensor<T>& t, int c, F f) const {
        const int n = t.dim(0), h = t.dim(2), w = t.dim(3);
        for (int img = 0; img < n; ++img)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) f(t.at4(img, c, i, j));
    }

    int c_;
    T momentum_, eps_;
    bool train_ = true;
    Param<T> gamma_, beta_;
    Tensor<T> run_mean_, run_var_;
    Tensor<T> x_, xhat_;
    std::vector<T> mean_, ivar_;
};

template <class T>
class LeakyReLU : public Layer<T> {
public:
    explicit LeakyReLU(T alpha = T(0.2)) : alpha_(alpha) {}

    Tensor<T> forward(const Tensor<T>& x) override {
        x_ = x;
        Tensor<T> y = x;
        for (auto& v : y.data) v = v > 0 ? v : alpha_ * v;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> gx = gy;
        for (size_t i = 0; i < gx.data.size(); ++i)
            if (x_.data[i] <= 0) gx.data[i] *= alpha_;
        return gx;
    }

private:
    T alpha_;
    Tensor<T> x_;
};

template <class T>
class Sigmoid : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x) override {
        y_ = x;
        for (auto& v : y_.data) v = T(1) / (T(1) + std::exp(-v));
        return y_;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> gx = gy;
        for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] *= y_.data[i] * (T(1) - y_.data[i]);
        return gx;
    }

private:
    Tensor<T> y_;
};

template <class T>
class Tanh : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x) override {
        y_ = x;
        for (auto& v : y_.data) v = std::tanh(v);
        return y_;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> gx = gy;
        for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] *= T(1) - y_.data[i] * y_.data[i];
        return gx;
    }

private:
    Tensor<T> y_;
};

// Nearest-neighbour 2x upsampling.
template <class T>
class Upsample2x : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x) override {
        in_shape_ = x.shape;
        const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        Tensor<T> y({n, c, 2 * h, 2 * w});
        for (int img = 0; img < n; ++img)
            for (int ch = 0; ch < c; ++ch)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) {
                        T v = x.at4(img, ch, i, j);
                        y.at4(img, ch, 2 * i, 2 * j) = v;
                        y.at4(img, ch, 2 * i, 2 * j + 1) = v;
                        y.at4(img, ch, 2 * i + 1, 2 * j) = v;
                        y.at4(img, ch, 2 * i + 1, 2 * j + 1) = v;
                    }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> gx(in_shape_);
        const int n = gx.dim(0), c = gx.dim(1), h = gx.dim(2), w = gx.dim(3);
        for (int img = 0; img < n; ++img)
            for (int ch = 0; ch < c; ++ch)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j)
                        gx.at4(img, ch, i, j) =
                            gy.at4(img, ch, 2 * i, 2 * j) + gy.at4(img, ch, 2 * i, 2 * j + 1) +
                            gy.at4(img, ch, 2 * i + 1, 2 * j) + gy.at4(img, ch, 2 * i + 1, 2 * j + 1);
        return gx;
    }

private:
    std::vector<int> in_shape_;
};

template <class T>
class Flatten : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x) override {
        in_shape_ = x.shape;
        Tensor<T> y;
        y.shape = {x.dim(0), static_cast<int>(x.numel() / x.dim(0))};
        y.data = x.data;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> gx;
        gx.shape = in_shape_;
        gx.data = gy.data;
        return gx;
    }

private:
    std::vector<int> in_shape_;
};

template <class T>
class Sequential : public Layer<T> {
public:
    Sequential() = default;

    template <class L, class... Args>
    L* add(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L* raw = layer.get();
        layers_.push_back(std::move(layer));
        return raw;
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        Tensor<T> h = x;
        for (auto& l : layers_) h = l->forward(h);
        return h;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> g = gy;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
        return g;
    }

    std::vector<Param<T>*> params() override {
        std::vector<Param<T>*> out;
        for (auto& l : layers_) {
            auto p = l->params();
            out.insert(out.end(), p.begin(), p.end());
        }
        return out;
    }

    void set_train(bool t) override {
        for (auto& l : layers_) l->set_train(t);
    }

    size_t size() const { return layers_.size(); }
    Layer<T>* at(size_t i) { return layers_.at(i).get(); }

private:
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

template <class T>
void zero_grads(const std::vector<Param<T>*>& params) {
    for (auto* p : params) p->grad.zero();
}

template <class T>
class Adam {
public:
    explicit Adam(std::vector<Param<T>*> params, double lr, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (auto* p : params_) {
            m_.emplace_back(p->value.shape);
            v_.emplace_back(p->value.shape);
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t k = 0; k < params_.size(); ++k) {
            auto& p = *params_[k];
            for (size_t i = 0; i < p.value.data.size(); ++i) {
                double g = p.grad.data[i];
                double m = beta1_ * m_[k].data[i] + (1 - beta1_) * g;
                double v = beta2_ * v_[k].data[i] + (1 - beta2_) * g * g;
                m_[k].data[i] = static_cast<T>(m);
                v_[k].data[i] = static_cast<T>(v);
                p.value.data[i] -= static_cast<T>(lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_));
            }
        }
    }

    void zero_grads() { nn::zero_grads(params_); }
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

private:
    std::vector<Param<T>*> params_;
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

}  // namespace ganmark::nn
