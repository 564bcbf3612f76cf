#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cosmo/rng.hpp"
#include "cosmo/tg/checkpoint.hpp"
#include "cosmo/tg/ops.hpp"
#include "cosmo/tg/optim.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>

using namespace tg;
using cosmo::Rng;

namespace {

Tensor rand_tensor(Rng& rng, const std::vector<int>& shape, double lo, double hi,
                   bool requires_grad = true) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    std::vector<Scalar> data(static_cast<size_t>(n));
    for (auto& v : data) v = static_cast<Scalar>(rng.uniform(lo, hi));
    return Tensor::from_data(shape, std::move(data), requires_grad);
}

// Random data bounded away from zero, so kinked ops (relu, l1) see no sign
// flips within the finite-difference step.
Tensor rand_tensor_signed(Rng& rng, const std::vector<int>& shape, bool requires_grad = true) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    std::vector<Scalar> data(static_cast<size_t>(n));
    for (auto& v : data) {
        double m = rng.uniform(0.15, 1.0);
        v = static_cast<Scalar>(rng.uniform() < 0.5 ? -m : m);
    }
    return Tensor::from_data(shape, std::move(data), requires_grad);
}

// Central finite differences against the analytic gradient on >= `probes`
// randomly chosen leaf entries.
void fd_check(const std::string& what, std::vector<Tensor> leaves,
              const std::function<Tensor()>& eval, Rng& rng, double tol = 1e-4,
              int probes = 24) {
    for (auto& l : leaves) l.zero_grad();
    Tensor loss = eval();
    REQUIRE(loss.numel() == 1);
    backward(loss);
    std::vector<std::vector<Scalar>> analytic;
    for (auto& l : leaves) analytic.push_back(l.grad());

    double worst = 0;
    for (int p = 0; p < probes; ++p) {
        size_t li = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(leaves.size()) - 1));
        auto& leaf = leaves[li];
        size_t i = static_cast<size_t>(rng.uniform_int(0, leaf.numel() - 1));
        double x0 = leaf.data()[i];
        double h = 1e-5 * (1.0 + std::abs(x0));
        leaf.data()[i] = static_cast<Scalar>(x0 + h);
        double fp = eval().item();
        leaf.data()[i] = static_cast<Scalar>(x0 - h);
        double fm = eval().item();
        leaf.data()[i] = static_cast<Scalar>(x0);
        double fd = (fp - fm) / (2.0 * h);
        double an = analytic[li][i];
        double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
        worst = std::max(worst, err);
    }
    INFO(what << ": worst relative FD error " << worst);
    CHECK(worst < tol);
}

std::vector<uint8_t> bytes_of(const std::vector<Scalar>& v) {
    std::vector<uint8_t> out(v.size() * sizeof(Scalar));
    std::memcpy(out.data(), v.data(), out.size());
    return out;
}

}  // namespace

TEST_CASE("conv2d scaling identity on ones input") {
    Tensor x = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor w = Tensor::from_data({1, 1, 1, 1}, {2.0});
    Tensor out = conv2d(x, w, Tensor(), 1, 0);
    REQUIRE(out.shape() == std::vector<int>{1, 1, 3, 3});
    for (Scalar v : out.data()) CHECK(v == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("conv2d zero kernel gives zero output") {
    Rng rng(3);
    Tensor x = rand_tensor(rng, {2, 3, 5, 5}, -1, 1, false);
    Tensor w = Tensor::zeros({4, 3, 3, 3});
    Tensor out = conv2d(x, w, Tensor(), 1, 1);
    for (Scalar v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("conv2d matches brute-force nested-loop oracle") {
    // 4x4 ramp, 3x3 averaging kernel, stride 1, pad 1
    std::vector<Scalar> ramp(16);
    for (int i = 0; i < 16; ++i) ramp[static_cast<size_t>(i)] = static_cast<Scalar>(i);
    Tensor x = Tensor::from_data({1, 1, 4, 4}, ramp);
    Tensor w = Tensor::full({1, 1, 3, 3}, 1.0 / 9.0);
    Tensor out = conv2d(x, w, Tensor(), 1, 1);

    for (int oy = 0; oy < 4; ++oy)
        for (int ox = 0; ox < 4; ++ox) {
            double acc = 0.0;  // direct summation
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    int iy = oy - 1 + ky, ix = ox - 1 + kx;
                    if (iy < 0 || iy >= 4 || ix < 0 || ix >= 4) continue;
                    acc += ramp[static_cast<size_t>(iy * 4 + ix)] / 9.0;
                }
            CHECK(out.data()[static_cast<size_t>(oy * 4 + ox)] ==
                  doctest::Approx(acc).epsilon(1e-12));
        }
}

TEST_CASE("conv2d rejects bad shapes") {
    Tensor x = Tensor::zeros({1, 2, 4, 4});
    Tensor w = Tensor::zeros({1, 3, 3, 3});  // channel mismatch
    CHECK_THROWS_AS(conv2d(x, w, Tensor(), 1, 1), std::invalid_argument);
    Tensor w2 = Tensor::zeros({1, 2, 3, 3});
    CHECK_THROWS_AS(conv2d(x, w2, Tensor(), 2, 1), std::invalid_argument);  // 5 % 2 != 0
}

TEST_CASE("adain with unit gamma and zero beta instance-normalizes") {
    Rng rng(7);
    Tensor x = rand_tensor(rng, {2, 3, 6, 6}, -2, 5, false);
    Tensor g = Tensor::full({2, 3}, 1.0);
    Tensor b = Tensor::zeros({2, 3});
    Tensor out = adain(x, g, b);
    for (int nc = 0; nc < 6; ++nc) {
        double m = 0, var = 0;
        for (int i = 0; i < 36; ++i) m += out.data()[static_cast<size_t>(nc * 36 + i)];
        m /= 36;
        for (int i = 0; i < 36; ++i) {
            double d = out.data()[static_cast<size_t>(nc * 36 + i)] - m;
            var += d * d;
        }
        var /= 36;
        CHECK(std::abs(m) < 1e-12);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // up to the eps guard
    }
}

TEST_CASE("adain with zero gamma yields constant beta per channel") {
    Rng rng(8);
    Tensor x = rand_tensor(rng, {1, 2, 4, 4}, -1, 1, false);
    Tensor g = Tensor::zeros({1, 2});
    Tensor b = Tensor::from_data({1, 2}, {3.5, -1.25});
    Tensor out = adain(x, g, b);
    for (int i = 0; i < 16; ++i) CHECK(out.data()[static_cast<size_t>(i)] == 3.5);
    for (int i = 16; i < 32; ++i) CHECK(out.data()[static_cast<size_t>(i)] == -1.25);
}

TEST_CASE("adain hand-computed 2x2 example") {
    Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor g = Tensor::full({1, 1}, 2.0);
    Tensor b = Tensor::full({1, 1}, 1.0);
    Tensor out = adain(x, g, b);
    double mean = 2.5, var = 1.25, eps = 1e-5;
    double istd = 1.0 / std::sqrt(var + eps);
    for (int i = 0; i < 4; ++i) {
        double expected = 2.0 * ((i + 1) - mean) * istd + 1.0;
        CHECK(out.data()[static_cast<size_t>(i)] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("backward of sum yields all-ones gradient") {
    Rng rng(9);
    Tensor x = rand_tensor(rng, {3, 4}, -1, 1, true);
    backward(sum(x));
    for (Scalar g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of squared norm at [1,-2] yields [2,-4]") {
    Tensor x = Tensor::from_data({2}, {1.0, -2.0}, true);
    backward(sum(mul(x, x)));
    CHECK(x.grad()[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(x.grad()[1] == doctest::Approx(-4.0).epsilon(1e-14));
}

TEST_CASE("backward rejects non-scalar loss") {
    Tensor x = Tensor::zeros({3}, true);
    CHECK_THROWS_AS(backward(add(x, x)), std::invalid_argument);
}

TEST_CASE("node used twice accumulates both paths") {
    Tensor x = Tensor::from_data({2}, {1.0, 3.0}, true);
    backward(sum(add(x, x)));
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 2.0);
}

TEST_CASE("gradient accumulation is additive until zeroed") {
    Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
    backward(sum(x));
    backward(sum(x));
    CHECK(x.grad()[0] == 2.0);
    x.zero_grad();
    backward(sum(x));
    CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("finite differences validate every layer gradient") {
    Rng rng(42);

    SUBCASE("conv2d") {
        Tensor x = rand_tensor(rng, {2, 3, 6, 6}, -1, 1);
        Tensor w = rand_tensor(rng, {4, 3, 3, 3}, -0.5, 0.5);
        Tensor b = rand_tensor(rng, {4}, -0.2, 0.2);
        fd_check("conv2d", {x, w, b},
                 [&] { return sum(tanh_op(conv2d(x, w, b, 1, 1))); }, rng);
    }
    SUBCASE("conv2d strided") {
        Tensor x = rand_tensor(rng, {1, 2, 8, 8}, -1, 1);
        Tensor w = rand_tensor(rng, {3, 2, 4, 4}, -0.5, 0.5);
        Tensor b = rand_tensor(rng, {3}, -0.2, 0.2);
        fd_check("conv2d_s2", {x, w, b},
                 [&] { return sum(tanh_op(conv2d(x, w, b, 2, 1))); }, rng);
    }
    SUBCASE("conv_transpose2d") {
        Tensor x = rand_tensor(rng, {1, 3, 4, 4}, -1, 1);
        Tensor w = rand_tensor(rng, {3, 2, 4, 4}, -0.5, 0.5);
        Tensor b = rand_tensor(rng, {2}, -0.2, 0.2);
        fd_check("conv_transpose2d", {x, w, b},
                 [&] { return sum(tanh_op(conv_transpose2d(x, w, b, 2, 1))); }, rng);
    }
    SUBCASE("upsample_nearest2d") {
        Tensor x = rand_tensor(rng, {2, 2, 3, 3}, -1, 1);
        fd_check("upsample", {x}, [&] { return sum(tanh_op(upsample_nearest2d(x, 2))); }, rng);
    }
    SUBCASE("relu and leaky relu") {
        Tensor x = rand_tensor_signed(rng, {4, 9});
        fd_check("relu", {x}, [&] { return sum(relu(x)); }, rng);
        Tensor y = rand_tensor_signed(rng, {4, 9});
        fd_check("leaky_relu", {y}, [&] { return sum(relu(y, 0.2)); }, rng);
    }
    SUBCASE("tanh head") {
        Tensor x = rand_tensor(rng, {3, 7}, -2, 2);
        fd_check("tanh", {x}, [&] { return sum(mul(tanh_op(x), tanh_op(x))); }, rng);
    }
    SUBCASE("linear") {
        Tensor x = rand_tensor(rng, {3, 5}, -1, 1);
        Tensor w = rand_tensor(rng, {4, 5}, -0.6, 0.6);
        Tensor b = rand_tensor(rng, {4}, -0.2, 0.2);
        fd_check("linear", {x, w, b}, [&] { return sum(tanh_op(linear(x, w, b))); }, rng);
    }
    SUBCASE("adaptive_avg_pool2d") {
        Tensor x = rand_tensor(rng, {2, 2, 5, 7}, -1, 1);
        fd_check("adaptive_avg_pool2d", {x},
                 [&] { return sum(tanh_op(adaptive_avg_pool2d(x, 2, 3))); }, rng);
    }
    SUBCASE("instance_norm") {
        Tensor x = rand_tensor(rng, {2, 3, 4, 4}, -2, 2);
        fd_check("instance_norm", {x}, [&] { return sum(tanh_op(instance_norm(x))); }, rng);
    }
    SUBCASE("adain") {
        Tensor x = rand_tensor(rng, {2, 2, 4, 4}, -2, 2);
        Tensor g = rand_tensor(rng, {2, 2}, 0.5, 2.0);
        Tensor b = rand_tensor(rng, {2, 2}, -1, 1);
        fd_check("adain", {x, g, b}, [&] { return sum(tanh_op(adain(x, g, b))); }, rng);
    }
    SUBCASE("l1 loss") {
        Tensor a = rand_tensor_signed(rng, {5, 5});
        Tensor b = rand_tensor_signed(rng, {5, 5});
        fd_check("l1_loss", {a, b}, [&] { return l1_loss(a, b); }, rng);
    }
    SUBCASE("mse loss") {
        Tensor a = rand_tensor(rng, {5, 5}, -1, 1);
        Tensor b = rand_tensor(rng, {5, 5}, -1, 1);
        fd_check("mse_loss", {a, b}, [&] { return mse_loss(a, b); }, rng);
        Tensor c = rand_tensor(rng, {4, 4}, -1, 1);
        fd_check("mse_to_const", {c}, [&] { return mse_to_const(c, 0.7); }, rng);
    }
    SUBCASE("concat and narrow") {
        Tensor a = rand_tensor(rng, {2, 2, 3, 3}, -1, 1);
        Tensor b = rand_tensor(rng, {2, 1, 3, 3}, -1, 1);
        fd_check("concat_channels", {a, b},
                 [&] { return sum(tanh_op(concat_channels(a, b))); }, rng);
        Tensor x = rand_tensor(rng, {3, 8}, -1, 1);
        fd_check("narrow_cols", {x}, [&] { return sum(tanh_op(narrow_cols(x, 2, 4))); }, rng);
    }
    SUBCASE("spectral_norm_apply") {
        Tensor w = rand_tensor(rng, {4, 6}, -1, 1);
        std::vector<Scalar> u(4), v(6);
        for (auto& t : u) t = static_cast<Scalar>(rng.normal());
        for (auto& t : v) t = static_cast<Scalar>(rng.normal());
        auto nrm = [](std::vector<Scalar>& z) {
            Scalar n = 0;
            for (auto t : z) n += t * t;
            for (auto& t : z) t /= std::sqrt(n);
        };
        nrm(u);
        nrm(v);
        fd_check("spectral_norm_apply", {w},
                 [&] { return sum(tanh_op(spectral_norm_apply(w, u, v))); }, rng);
    }
    SUBCASE("residual block composition") {
        Tensor x = rand_tensor(rng, {1, 3, 5, 5}, -1, 1);
        Tensor w1 = rand_tensor(rng, {3, 3, 3, 3}, -0.4, 0.4);
        Tensor b1 = rand_tensor(rng, {3}, -0.1, 0.1);
        Tensor w2 = rand_tensor(rng, {3, 3, 3, 3}, -0.4, 0.4);
        Tensor b2 = rand_tensor(rng, {3}, -0.1, 0.1);
        fd_check("res_block", {x, w1, b1, w2, b2},
                 [&] {
                     Tensor y = instance_norm(conv2d(x, w1, b1, 1, 1));
                     y = relu(y, 0.01);  // smooth enough for FD at random data
                     y = instance_norm(conv2d(y, w2, b2, 1, 1));
                     return mean(mul(add(x, y), add(x, y)));
                 },
                 rng, 2e-4);
    }
    SUBCASE("composed conv-relu-sum network") {
        Tensor x = rand_tensor(rng, {1, 1, 6, 6}, 0.1, 1.0);
        Tensor w = rand_tensor(rng, {2, 1, 3, 3}, 0.1, 0.5);
        Tensor b = rand_tensor(rng, {2}, 0.05, 0.2);
        fd_check("conv_relu_sum", {x, w, b},
                 [&] { return sum(relu(conv2d(x, w, b, 1, 1))); }, rng);
    }
}

TEST_CASE("spectral normalization brings the top singular value to 1") {
    Rng rng(1234);
    for (auto [rows, cols] : std::vector<std::pair<int, int>>{{8, 12}, {16, 16}, {5, 30}}) {
        std::vector<Scalar> w(static_cast<size_t>(rows * cols));
        for (auto& v : w) v = static_cast<Scalar>(rng.normal());
        Scalar sigma = 0;
        auto wn = spectral_normalize(w, rows, cols, 8, &sigma);
        CHECK(sigma > 0);
        using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        Mat m(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) m(r, c) = wn[static_cast<size_t>(r * cols + c)];
        Eigen::JacobiSVD<Mat> svd(m);
        double top = svd.singularValues()(0);
        INFO("rows=" << rows << " cols=" << cols << " top sv=" << top);
        CHECK(top == doctest::Approx(1.0).epsilon(0.05));
    }
}

TEST_CASE("identical seeds give bitwise identical forward and backward") {
    auto run = [](uint64_t seed) {
        Rng rng(seed);
        Tensor x = rand_tensor(rng, {1, 2, 8, 8}, -1, 1);
        Tensor w = rand_tensor(rng, {3, 2, 3, 3}, -0.5, 0.5);
        Tensor b = rand_tensor(rng, {3}, -0.1, 0.1);
        Tensor out = sum(tanh_op(instance_norm(conv2d(x, w, b, 1, 1))));
        backward(out);
        return std::make_tuple(bytes_of(out.data()), bytes_of(x.grad()), bytes_of(w.grad()));
    };
    auto a = run(77);
    auto b = run(77);
    CHECK(std::get<0>(a) == std::get<0>(b));
    CHECK(std::get<1>(a) == std::get<1>(b));
    CHECK(std::get<2>(a) == std::get<2>(b));
    auto c = run(78);
    CHECK(std::get<0>(a) != std::get<0>(c));
}

TEST_CASE("checkpoint round-trips bitwise") {
    namespace fs = std::filesystem;
    fs::create_directories("test_tmp");
    Rng rng(5);
    Checkpoint ck;
    ck.meta = "{\"purpose\":\"roundtrip\"}";
    ck.put("layer.w", rand_tensor(rng, {4, 3, 3, 3}, -1, 1, false));
    ck.put("layer.b", rand_tensor(rng, {4}, -1, 1, false));
    ck.save("test_tmp/a.ckpt");
    Checkpoint l = Checkpoint::load("test_tmp/a.ckpt");
    CHECK(l.meta == ck.meta);
    CHECK(l.get("layer.w").data() == ck.get("layer.w").data());
    l.save("test_tmp/b.ckpt");

    auto slurp = [](const std::string& p) {
        std::ifstream is(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    };
    CHECK(slurp("test_tmp/a.ckpt") == slurp("test_tmp/b.ckpt"));
    CHECK_THROWS(l.get("missing"));
}

TEST_CASE("adam reduces a quadratic") {
    Tensor x = Tensor::from_data({3}, {5.0, -3.0, 2.0}, true);
    Adam opt(0.05, 0.9, 0.999);
    opt.add_params({x});
    double first = 0;
    for (int i = 0; i < 200; ++i) {
        opt.zero_grad();
        Tensor loss = sum(mul(x, x));
        if (i == 0) first = loss.item();
        backward(loss);
        opt.step();
    }
    Tensor final_loss = sum(mul(x, x));
    CHECK(final_loss.item() < 0.05 * first);
}

TEST_CASE("style prior sampling is standard normal") {
    Rng rng(2024);
    int n = 10000;
    double m = 0, m2 = 0;
    for (int i = 0; i < n; ++i) {
        double v = rng.normal();
        m += v;
        m2 += v * v;
    }
    m /= n;
    double sd = std::sqrt(m2 / n - m * m);
    CHECK(std::abs(m) < 0.05);
    CHECK(sd == doctest::Approx(1.0).epsilon(0.05));
}
