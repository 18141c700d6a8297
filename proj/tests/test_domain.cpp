#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "mfbo/domain.hpp"
#include "mfbo/rng.hpp"

using namespace mfbo;

namespace {

ProblemSpace simple_space() {
    ProblemSpace sp;
    sp.dx = 2;
    sp.numeric_bounds = {{{-1.0, 3.0}}, {{0.0, 10.0}}};
    sp.categorical_levels = {3, 2};
    sp.num_sources = 2;
    sp.hf_index = 0;
    return sp;
}

}  // namespace

TEST_CASE("space validation") {
    ProblemSpace sp = simple_space();
    CHECK_NOTHROW(sp.validate());
    CHECK(sp.dt() == 2);
    CHECK(sp.zeta_t_len() == 5);

    SUBCASE("bad bounds") {
        sp.numeric_bounds[0] = {{2.0, 2.0}};
        CHECK_THROWS_AS(sp.validate(), std::invalid_argument);
    }
    SUBCASE("level below two") {
        sp.categorical_levels[1] = 1;
        CHECK_THROWS_AS(sp.validate(), std::invalid_argument);
    }
    SUBCASE("hf index out of range") {
        sp.hf_index = 2;
        CHECK_THROWS_AS(sp.validate(), std::invalid_argument);
    }
    SUBCASE("bounds size mismatch") {
        sp.numeric_bounds.pop_back();
        CHECK_THROWS_AS(sp.validate(), std::invalid_argument);
    }
}

TEST_CASE("grouped one-hot encoding") {
    ProblemSpace sp = simple_space();

    Eigen::VectorXd z = encode_categorical({1, 0}, sp);
    REQUIRE(z.size() == 5);
    CHECK(z[0] == 0.0);
    CHECK(z[1] == 1.0);
    CHECK(z[2] == 0.0);
    CHECK(z[3] == 1.0);
    CHECK(z[4] == 0.0);

    SUBCASE("one hot per block") {
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 2; ++b) {
                Eigen::VectorXd v = encode_categorical({a, b}, sp);
                CHECK(v.head(3).sum() == 1.0);
                CHECK(v.tail(2).sum() == 1.0);
            }
    }
    SUBCASE("injective over valid levels") {
        std::vector<Eigen::VectorXd> seen;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 2; ++b) {
                Eigen::VectorXd v = encode_categorical({a, b}, sp);
                for (const auto& w : seen) CHECK((v - w).norm() > 0.5);
                seen.push_back(v);
            }
    }
    SUBCASE("rejects bad levels") {
        CHECK_THROWS_AS(encode_categorical({3, 0}, sp), std::out_of_range);
        CHECK_THROWS_AS(encode_categorical({-1, 0}, sp), std::out_of_range);
        CHECK_THROWS_AS(encode_categorical({0}, sp), std::invalid_argument);
    }
}

TEST_CASE("source encoding") {
    Eigen::VectorXd z = encode_source(2, 4);
    REQUIRE(z.size() == 4);
    CHECK(z.sum() == 1.0);
    CHECK(z[2] == 1.0);
    CHECK_THROWS_AS(encode_source(4, 4), std::out_of_range);
    CHECK_THROWS_AS(encode_source(-1, 4), std::out_of_range);
}

TEST_CASE("assemble concatenates per-source tables") {
    ProblemSpace sp = simple_space();
    const int cols = sp.dx + sp.dt();

    Eigen::MatrixXd X0(5, cols), X1(50, cols);
    Eigen::VectorXd y0(5), y1(50);
    Rng rng(7);
    auto fill = [&](Eigen::MatrixXd& X, Eigen::VectorXd& y) {
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            X(i, 0) = rng.uniform(-1.0, 3.0);
            X(i, 1) = rng.uniform(0.0, 10.0);
            X(i, 2) = rng.uniform_int(3);
            X(i, 3) = rng.uniform_int(2);
            y[i] = rng.normal();
        }
    };
    fill(X0, y0);
    fill(X1, y1);

    MultiSourceDataset ds = assemble(sp, {{X0, y0}, {X1, y1}}, {1000.0, 1.0});
    CHECK(ds.n() == 55);
    CHECK(ds.counts() == std::vector<int>{5, 50});

    SUBCASE("split by source recovers tables in order") {
        int i0 = 0, i1 = 0;
        for (int i = 0; i < ds.n(); ++i) {
            const auto& p = ds.points[i];
            if (p.s == 0) {
                CHECK(p.x[0] == X0(i0, 0));
                CHECK(p.t[0] == static_cast<int>(X0(i0, 2)));
                CHECK(ds.responses[i] == y0[i0]);
                ++i0;
            } else {
                CHECK(p.x[1] == X1(i1, 1));
                CHECK(p.t[1] == static_cast<int>(X1(i1, 3)));
                CHECK(ds.responses[i] == y1[i1]);
                ++i1;
            }
        }
        CHECK(i0 == 5);
        CHECK(i1 == 50);
    }
    SUBCASE("empty LF table is valid") {
        MultiSourceDataset d2 =
            assemble(sp, {{X0, y0}, {Eigen::MatrixXd(), Eigen::VectorXd()}},
                     {1000.0, 1.0});
        CHECK(d2.n() == 5);
        CHECK(d2.counts() == std::vector<int>{5, 0});
    }
    SUBCASE("single source table keeps zero tags") {
        ProblemSpace s1 = sp;
        s1.num_sources = 1;
        MultiSourceDataset d3 = assemble(s1, {{X0, y0}}, {1.0});
        for (const auto& p : d3.points) CHECK(p.s == 0);
    }
    SUBCASE("ragged table rejected") {
        Eigen::VectorXd bad = y1.head(49);
        CHECK_THROWS_AS(assemble(sp, {{X0, y0}, {X1, bad}}, {1000.0, 1.0}),
                        std::invalid_argument);
    }
    SUBCASE("non-positive cost rejected") {
        CHECK_THROWS_AS(assemble(sp, {{X0, y0}, {X1, y1}}, {1000.0, 0.0}),
                        std::invalid_argument);
    }
}

TEST_CASE("unit scaling") {
    ProblemSpace sp = simple_space();
    Eigen::VectorXd lo(2), hi(2), mid(2);
    lo << -1.0, 0.0;
    hi << 3.0, 10.0;
    mid << 1.0, 5.0;

    CHECK(scale_to_unit(lo, sp).isZero(0.0));
    CHECK(scale_to_unit(hi, sp).isApprox(Eigen::VectorXd::Ones(2)));
    CHECK(scale_to_unit(mid, sp).isApprox(Eigen::VectorXd::Constant(2, 0.5)));

    SUBCASE("round trip") {
        Rng rng(11);
        for (int k = 0; k < 100; ++k) {
            Eigen::VectorXd x(2);
            x << rng.uniform(-1.0, 3.0), rng.uniform(0.0, 10.0);
            Eigen::VectorXd back = unscale_from_unit(scale_to_unit(x, sp), sp);
            CHECK((back - x).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
    SUBCASE("ordering preserved per coordinate") {
        Eigen::VectorXd a(2), b(2);
        a << 0.0, 2.0;
        b << 0.5, 7.0;
        Eigen::VectorXd ua = scale_to_unit(a, sp), ub = scale_to_unit(b, sp);
        CHECK(ua[0] < ub[0]);
        CHECK(ua[1] < ub[1]);
    }
    SUBCASE("unscale clamps to bounds") {
        Eigen::VectorXd u(2);
        u << -0.2, 1.3;
        Eigen::VectorXd x = unscale_from_unit(u, sp);
        CHECK(x[0] == -1.0);
        CHECK(x[1] == 10.0);
    }
}

TEST_CASE("delimited ingestion") {
    const std::string path = "test_domain_fixture.csv";
    {
        std::ofstream f(path);
        f << "x1,x2,mat,y,source\n";
        f << "0.5, 1.0, steel, 3.25, 0\n";
        f << "1.5, 2.0, copper, 1.5, 1\n";
        f << "2.5, 0.5, steel, -0.75, 1\n";
        f << "\n";
        f << "0.0, 4.0, brass, 2.0, 0\n";
    }
    TableSchema schema;
    schema.numeric = {"x1", "x2"};
    schema.categorical = {"mat"};
    MultiSourceDataset ds = read_delimited(path, schema, {10.0, 1.0});

    CHECK(ds.n() == 4);
    CHECK(ds.space.dx == 2);
    CHECK(ds.space.dt() == 1);
    CHECK(ds.space.num_sources == 2);
    CHECK(ds.space.categorical_levels[0] == 3);
    // levels indexed by first appearance: steel=0, copper=1, brass=2
    CHECK(ds.points[0].t[0] == 0);
    CHECK(ds.points[1].t[0] == 1);
    CHECK(ds.points[3].t[0] == 2);
    CHECK(ds.responses[2] == -0.75);
    CHECK(ds.counts() == std::vector<int>{2, 2});
    // bounds inferred from data
    CHECK(ds.space.numeric_bounds[0][0] == 0.0);
    CHECK(ds.space.numeric_bounds[0][1] == 2.5);

    SUBCASE("numeric columns inferred when unnamed") {
        TableSchema bare;
        bare.categorical = {"mat"};
        MultiSourceDataset d2 = read_delimited(path, bare, {10.0, 1.0});
        CHECK(d2.space.dx == 2);
        CHECK(d2.points[0].x[0] == 0.5);
        CHECK(d2.points[0].x[1] == 1.0);
    }
    SUBCASE("missing column throws") {
        TableSchema bad = schema;
        bad.response = "target";
        CHECK_THROWS(read_delimited(path, bad, {10.0, 1.0}));
    }
    SUBCASE("short cost list padded with unit costs") {
        MultiSourceDataset d3 = read_delimited(path, schema, {});
        CHECK(d3.costs == std::vector<double>{1.0, 1.0});
    }
    std::remove(path.c_str());
}

TEST_CASE("dataset validation") {
    ProblemSpace sp = simple_space();
    MultiSourceDataset ds;
    ds.space = sp;
    ds.costs = {1000.0, 1.0};
    MixedPoint p;
    p.x = Eigen::VectorXd::Zero(2);
    p.t = {0, 0};
    p.s = 0;
    ds.points.push_back(p);
    ds.responses.resize(1);
    ds.responses[0] = 1.0;
    CHECK_NOTHROW(ds.validate());

    SUBCASE("length mismatch") {
        ds.responses.resize(2);
        CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
    }
    SUBCASE("source out of range") {
        ds.points[0].s = 5;
        CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
    }
    SUBCASE("wrong point dimension") {
        ds.points[0].x = Eigen::VectorXd::Zero(3);
        CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
    }
}
