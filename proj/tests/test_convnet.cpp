#include <catch2/catch_amalgamated.hpp>

#include "tensorlift/convnet.hpp"
#include "tensorlift/io.hpp"
#include "tensorlift/models.hpp"
#include "tensorlift/stability.hpp"

#include "helpers.hpp"

using namespace tensorlift;

namespace {

// Two disjoint chains sharing the root: a 4-parameter-per-depth topology with
// two leaf-to-root paths and a nontrivial operator kernel.
ConvTopology two_chain_topology() {
    std::vector<ConvEdge> edges = {
        {"a", "root", 1, {0, 2}},
        {"b", "root", 1, {1, 3}},
        {"la", "a", 2, {0, 4}},
        {"lb", "b", 2, {1, 5}},
    };
    return ConvTopology(8, {"root", "a", "b", "la", "lb"}, "root", {"la", "lb"},
                        std::move(edges));
}

// One leaf feeding the root through two branches: both orders of merging
// paths exist in a single leaf.
ConvTopology diamond_topology(int shift_a, int shift_b) {
    std::vector<ConvEdge> edges = {
        {"a", "root", 1, {shift_a}},
        {"b", "root", 1, {shift_b}},
        {"leaf", "a", 2, {0}},
        {"leaf", "b", 2, {1}},
    };
    return ConvTopology(8, {"root", "a", "b", "leaf"}, "root", {"leaf"}, std::move(edges));
}

// Textbook definition of circular convolution, as an independent oracle.
Eigen::VectorXd conv_oracle(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const int n = static_cast<int>(a.size());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (int m = 0; m < n; ++m)
        for (int j = 0; j < n; ++j) out(m) += a(j) * b(((m - j) % n + n) % n);
    return out;
}

Eigen::VectorXd translate(const Eigen::VectorXd& v, int by) {
    const int n = static_cast<int>(v.size());
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) out((i + by) % n) = v(i);
    return out;
}

} // namespace

TEST_CASE("dyadic chain construction") {
    SECTION("depth one is a single two-tap edge") {
        ConvTopology t = make_haar_topology(1, 4);
        REQUIRE(t.edges().size() == 1);
        CHECK(t.edges()[0].support == std::vector<int>{0, 2});
        CHECK(t.depth() == 1);
        CHECK(t.width() == 2);
        CHECK(t.paths().size() == 1);
    }

    SECTION("offsets must fit the signal") {
        CHECK_THROWS_AS(make_haar_topology(2, 2), InvalidParameters);
        CHECK_THROWS_AS(make_haar_topology(3, 8), InvalidParameters);
    }

    SECTION("offset sums must not collide modulo the length") {
        // 2+4+8 = 14 collides with 4 modulo 10.
        CHECK_THROWS_AS(make_haar_topology(3, 10), InvalidParameters);
        CHECK_NOTHROW(make_haar_topology(3, 9));
        CHECK_NOTHROW(make_haar_topology(3, 16));
    }

    SECTION("each depth reaches twice as far") {
        ConvTopology t = make_haar_topology(3, 16);
        for (const ConvEdge& e : t.edges())
            CHECK(e.support == std::vector<int>({0, 1 << e.depth}));
    }
}

TEST_CASE("topology validation rejects malformed networks") {
    SECTION("depth mismatch between declaration and structure") {
        std::vector<ConvEdge> edges = {{"leaf", "root", 2, {0, 1}}};
        CHECK_THROWS_AS(ConvTopology(4, {"root", "leaf"}, "root", {"leaf"}, edges),
                        InvalidTopology);
    }

    SECTION("paths of different lengths to the root") {
        std::vector<ConvEdge> edges = {
            {"a", "root", 1, {0}},
            {"leaf", "a", 2, {0}},
            {"leaf", "root", 1, {1}},
        };
        CHECK_THROWS_AS(ConvTopology(4, {"root", "a", "leaf"}, "root", {"leaf"}, edges),
                        InvalidTopology);
    }

    SECTION("unequal tap totals across depths") {
        std::vector<ConvEdge> edges = {
            {"a", "root", 1, {0, 1, 2}},
            {"leaf", "a", 2, {0, 1}},
        };
        CHECK_THROWS_AS(ConvTopology(4, {"root", "a", "leaf"}, "root", {"leaf"}, edges),
                        InvalidTopology);
    }

    SECTION("support offsets outside the signal") {
        std::vector<ConvEdge> edges = {{"leaf", "root", 1, {0, 4}}};
        CHECK_THROWS_AS(ConvTopology(4, {"root", "leaf"}, "root", {"leaf"}, edges),
                        InvalidTopology);
    }

    SECTION("a listed leaf with an inbound edge") {
        std::vector<ConvEdge> edges = {
            {"a", "root", 1, {0, 1}},
            {"leaf", "a", 2, {0, 1}},
        };
        CHECK_THROWS_AS(ConvTopology(4, {"root", "a", "leaf"}, "root", {"leaf", "a"}, edges),
                        InvalidTopology);
    }

    SECTION("interior node without input") {
        std::vector<ConvEdge> edges = {
            {"a", "root", 1, {0}},
            {"b", "root", 1, {1}},
            {"leaf", "a", 2, {0, 1}},
        };
        CHECK_THROWS_AS(ConvTopology(4, {"root", "a", "b", "leaf"}, "root", {"leaf"}, edges),
                        InvalidTopology);
    }
}

TEST_CASE("slot layout follows canonical edge order with ascending offsets") {
    ConvTopology t = two_chain_topology();
    REQUIRE(t.width() == 4);
    // Depth 1: edges sorted by source (a before b); slots list taps in order.
    CHECK(t.slot_of(t.edges_at_depth(1)[0], 0) == 0);
    CHECK(t.slot_of(t.edges_at_depth(1)[0], 2) == 1);
    CHECK(t.slot_of(t.edges_at_depth(1)[1], 1) == 2);
    CHECK(t.slot_of(t.edges_at_depth(1)[1], 3) == 3);
    CHECK_THROWS_AS(t.slot_of(0, 7), InvalidParameters);
}

TEST_CASE("path convolution composes edge kernels") {
    ConvTopology t = make_haar_topology(2, 8);

    SECTION("Dirac kernels shift by the sum of tap offsets") {
        ParamStack h(2, 2);
        h.data() << 0, 1, 0, 1;  // second tap on both depths: offsets 2 and 4
        Eigen::VectorXd y = path_convolution(t, 0, h);
        for (int i = 0; i < 8; ++i) CHECK(y(i) == (i == 6 ? 1.0 : 0.0));
    }

    SECTION("agrees with the textbook convolution") {
        Rng rng(70, 0);
        for (int trial = 0; trial < 25; ++trial) {
            ParamStack h = tlt::random_stack(2, 2, rng);
            Eigen::VectorXd expect =
                conv_oracle(t.edge_kernel(t.paths()[0][0], h), t.edge_kernel(t.paths()[0][1], h));
            CHECK((path_convolution(t, 0, h) - expect).norm() <= 1e-12);
        }
    }

    SECTION("depth three, associativity against the oracle") {
        ConvTopology t3 = make_haar_topology(3, 16);
        Rng rng(71, 0);
        ParamStack h = tlt::random_stack(3, 2, rng);
        Eigen::VectorXd expect = conv_oracle(
            conv_oracle(t3.edge_kernel(t3.paths()[0][0], h), t3.edge_kernel(t3.paths()[0][1], h)),
            t3.edge_kernel(t3.paths()[0][2], h));
        CHECK((path_convolution(t3, 0, h) - expect).norm() <= 1e-12);
    }

    SECTION("invalid path index") {
        ParamStack h = ParamStack::ones(2, 2);
        CHECK_THROWS_AS(path_convolution(t, 5, h), InvalidPath);
    }
}

TEST_CASE("assembled factors realize circulants of edge kernels") {
    ConvTopology t = make_haar_topology(1, 4);
    FactorFamily f = assemble_factors(t);
    REQUIRE(f.out_rows() == 4);
    REQUIRE(f.out_cols() == 4);
    ParamStack h(1, 2);
    h.data() << 3, 5;  // kernel 3*d0 + 5*d2
    Eigen::MatrixXd M = eval_product(f, h);
    Eigen::VectorXd c(4);
    c << 3, 0, 5, 0;
    for (int j = 0; j < 4; ++j) CHECK((M.col(j) - translate(c, j)).norm() <= 1e-14);
}

TEST_CASE("assembled product columns sum translated path convolutions") {
    // The output for a Dirac at leaf position j is the j-translate of the sum
    // of that leaf's path filters; this pins down blocks, slots and signs.
    const ConvTopology topologies[] = {make_haar_topology(2, 8), two_chain_topology(),
                                       diamond_topology(0, 2)};
    Rng rng(72, 0);
    for (const ConvTopology& t : topologies) {
        FactorFamily f = assemble_factors(t);
        const int N = t.signal_len();
        for (int trial = 0; trial < 30; ++trial) {
            ParamStack h = tlt::random_stack(t.depth(), t.width(), rng);
            Eigen::MatrixXd M = eval_product(f, h);
            REQUIRE(M.rows() == N);
            REQUIRE(M.cols() == N * static_cast<int>(t.leaves().size()));
            for (int li = 0; li < static_cast<int>(t.leaves().size()); ++li) {
                Eigen::VectorXd base = Eigen::VectorXd::Zero(N);
                for (int pi : t.leaf_paths(li)) base += path_convolution(t, pi, h);
                for (int j = 0; j < N; ++j)
                    REQUIRE((M.col(li * N + j) - translate(base, j)).norm() <=
                            1e-12 * (1.0 + base.norm()));
            }
        }
    }
}

TEST_CASE("combinatorial certificate accepts chains and disjoint merges") {
    for (int K = 1; K <= 4; ++K) {
        TopologyVerdict v = algo_check(make_haar_topology(K, 1 << (K + 1)));
        CHECK(v.passes);
        CHECK(v.supports_disjoint);
        CHECK(v.offending.empty());
        CHECK(v.valid_index_count == (std::int64_t(1) << K));
        CHECK(v.kernel_dim == 0);
    }

    // The two chains write to the same output positions, but through different
    // leaves; disjointness is only required within a leaf.
    TopologyVerdict tc = algo_check(two_chain_topology());
    CHECK(tc.passes);
    CHECK(tc.supports_disjoint);
    CHECK(tc.valid_index_count == 8);
    CHECK(tc.kernel_dim == 8);

    TopologyVerdict dm = algo_check(diamond_topology(0, 2));
    CHECK(dm.passes);
    CHECK(dm.supports_disjoint);
    CHECK(dm.valid_index_count == 2);
    CHECK(dm.kernel_dim == 2);
}

TEST_CASE("combinatorial certificate rejects overlapping tap chains") {
    SECTION("two parallel Dirac edges double an output sample") {
        std::vector<ConvEdge> edges = {
            {"leaf", "root", 1, {0}},
            {"leaf", "root", 1, {0}},
        };
        ConvTopology t(4, {"root", "leaf"}, "root", {"leaf"}, std::move(edges));
        TopologyVerdict v = algo_check(t);
        REQUIRE_FALSE(v.passes);
        CHECK_FALSE(v.supports_disjoint);
        REQUIRE(v.offending.size() == 1);
        CHECK(v.offending[0].leaf == "leaf");
        CHECK(v.offending[0].position == 0);
        CHECK(v.offending[0].count == 2);
    }

    SECTION("merging branches with colliding shifts") {
        // Both branch sums hit position 2.
        ConvTopology t = diamond_topology(2, 1);
        TopologyVerdict v = algo_check(t);
        CHECK_FALSE(v.passes);
        CHECK_FALSE(v.supports_disjoint);
    }
}

TEST_CASE("certificate verdict matches the dense all-ones product") {
    const ConvTopology cases[] = {make_haar_topology(2, 8), two_chain_topology(),
                                  diamond_topology(0, 2), diamond_topology(2, 1)};
    for (const ConvTopology& t : cases) {
        FactorFamily f = assemble_factors(t);
        Eigen::MatrixXd M = eval_product(f, ParamStack::ones(t.depth(), t.width()));
        bool all_01 = true;
        for (int i = 0; i < M.rows(); ++i)
            for (int j = 0; j < M.cols(); ++j)
                if (M(i, j) != 0.0 && M(i, j) != 1.0) all_01 = false;
        CHECK(algo_check(t).passes == all_01);
    }
}

TEST_CASE("single-chain operators act as scaled isometries") {
    for (int K : {1, 2, 3}) {
        const int N = 1 << (K + 1);
        ConvTopology t = make_haar_topology(K, N);
        LiftedOperator op = materialize_lifting(assemble_factors(t));
        CHECK(op.kernel_dim() == 0);
        CHECK_THAT(op.sigma_min(), Catch::Matchers::WithinRel(std::sqrt(double(N)), 1e-9));
        CHECK_THAT(op.sigma_max(), Catch::Matchers::WithinRel(std::sqrt(double(N)), 1e-9));

        Rng rng(73, static_cast<std::uint64_t>(K));
        for (int trial = 0; trial < 10; ++trial) {
            Eigen::VectorXd T = rng.normal_vector(op.domain_dim());
            CHECK_THAT(op.apply_flat(T).squaredNorm(),
                       Catch::Matchers::WithinRel(N * T.squaredNorm(), 1e-9));
        }
    }
}

TEST_CASE("kernel characterization holds for certified topologies") {
    SECTION("chain with trivial kernel") {
        KernelCheck r = verify_kernel_characterization(make_haar_topology(2, 8));
        CHECK(r.holds);
        CHECK(r.expected_dim == 0);
        CHECK(r.actual_dim == 0);
    }

    SECTION("two chains, kernel on non-path indices") {
        KernelCheck r = verify_kernel_characterization(two_chain_topology());
        CHECK(r.holds);
        CHECK(r.expected_dim == 8);
        CHECK(r.actual_dim == 8);
        CHECK(r.max_valid_coordinate <= 1e-10);
    }

    SECTION("merging topology") {
        KernelCheck r = verify_kernel_characterization(diamond_topology(0, 2));
        CHECK(r.holds);
        CHECK(r.expected_dim == 2);
    }

    SECTION("refuses uncertified topologies") {
        CHECK_THROWS_AS(verify_kernel_characterization(diamond_topology(2, 1)),
                        TopologyNotCertified);
    }
}

TEST_CASE("network distance restricts stacks path by path") {
    ConvTopology t = two_chain_topology();
    Rng rng(74, 0);

    SECTION("aggregates per-path class distances in the p-norm") {
        for (int trial = 0; trial < 20; ++trial) {
            ParamStack h = tlt::random_nondegenerate_stack(2, 4, rng);
            ParamStack g = tlt::random_nondegenerate_stack(2, 4, rng);
            for (double p : {1.0, 2.0, inf_norm}) {
                // Chain A owns slots {0,1} per depth, chain B slots {2,3}.
                ParamStack ha(2, 2), ga(2, 2), hb(2, 2), gb(2, 2);
                for (int k = 0; k < 2; ++k)
                    for (int c = 0; c < 2; ++c) {
                        ha(k, c) = h(k, c);
                        ga(k, c) = g(k, c);
                        hb(k, c) = h(k, 2 + c);
                        gb(k, c) = g(k, 2 + c);
                    }
                const double da = class_distance(ha, ga, p);
                const double db = class_distance(hb, gb, p);
                const double expect = std::isinf(p)
                                          ? std::max(da, db)
                                          : std::pow(std::pow(da, p) + std::pow(db, p), 1.0 / p);
                REQUIRE_THAT(network_class_distance(t, h, g, p),
                             Catch::Matchers::WithinRel(expect, 1e-10) ||
                                 Catch::Matchers::WithinAbs(expect, 1e-12));
            }
        }
    }

    SECTION("zero on per-path rescalings") {
        ParamStack h = tlt::random_nondegenerate_stack(2, 4, rng);
        ParamStack g = h;
        // Rescale chain A's two kernels by 3 and 1/3: same per-path classes.
        for (int c = 0; c < 2; ++c) {
            g(0, c) *= 3.0;
            g(1, c) /= 3.0;
        }
        CHECK(network_class_distance(t, h, g, 2.0) <= 1e-10);
    }

    SECTION("metric axioms across paths") {
        for (int trial = 0; trial < 30; ++trial) {
            ParamStack a = tlt::random_nondegenerate_stack(2, 4, rng);
            ParamStack b = tlt::random_nondegenerate_stack(2, 4, rng);
            ParamStack c = tlt::random_nondegenerate_stack(2, 4, rng);
            for (double p : {1.0, 2.0, inf_norm}) {
                const double ab = network_class_distance(t, a, b, p);
                const double ba = network_class_distance(t, b, a, p);
                REQUIRE_THAT(ab, Catch::Matchers::WithinRel(ba, 1e-9) ||
                                     Catch::Matchers::WithinAbs(ba, 1e-12));
                REQUIRE(ab <= network_class_distance(t, a, c, p) +
                                  network_class_distance(t, c, b, p) + 1e-9 * (1.0 + ab));
            }
        }
    }

    SECTION("rejects stacks with a silent kernel") {
        ParamStack h = tlt::random_nondegenerate_stack(2, 4, rng);
        ParamStack g = h;
        g(0, 0) = g(0, 1) = 0.0;  // chain A's depth-1 kernel vanishes
        CHECK_THROWS_AS(network_class_distance(t, h, g, 2.0), DegenerateParams);
    }
}

TEST_CASE("network stability bound evaluates its closed form") {
    ConvTopology t = make_haar_topology(1, 16);
    NetworkBound r = convnet_stability_bound(t, 2.0, 1.0, 0.3, 0.1);
    CHECK_THAT(r.bound, Catch::Matchers::WithinRel(0.7 * std::sqrt(2.0), 1e-12));
    CHECK(r.snr_ok);  // 0.4 <= sqrt(16)/2

    SECTION("depth scales the small-kernel penalty") {
        ConvTopology t3 = make_haar_topology(3, 16);
        NetworkBound weak = convnet_stability_bound(t3, 2.0, 0.5, 0.1, 0.0);
        NetworkBound strong = convnet_stability_bound(t3, 2.0, 1.0, 0.1, 0.0);
        CHECK_THAT(weak.bound, Catch::Matchers::WithinRel(4.0 * strong.bound, 1e-12));
    }

    SECTION("audits the reference stack's kernels") {
        ParamStack h(1, 2);
        h.data() << 0.5, 2.0;
        NetworkBound audited = convnet_stability_bound(t, 2.0, 1.0, 0.3, 0.1, &h);
        CHECK(audited.eps_checked);
        CHECK(audited.min_kernel_sup == 2.0);
        CHECK(audited.eps_ok);
        NetworkBound strict = convnet_stability_bound(t, 2.0, 3.0, 0.3, 0.1, &h);
        CHECK_FALSE(strict.eps_ok);
    }

    SECTION("refuses uncertified topologies") {
        CHECK_THROWS_AS(convnet_stability_bound(diamond_topology(2, 1), 2.0, 1.0, 0.1, 0.0),
                        TopologyNotCertified);
    }

    SECTION("large noise leaves the guarantee regime") {
        CHECK_FALSE(convnet_stability_bound(t, 2.0, 1.0, 5.0, 0.0).snr_ok);
    }
}

TEST_CASE("topology serialization round-trips byte for byte") {
    const ConvTopology cases[] = {make_haar_topology(2, 8), two_chain_topology(),
                                  diamond_topology(0, 2)};
    for (const ConvTopology& t : cases) {
        const std::string text = topology_to_json(t).dump(2);
        ConvTopology back = topology_from_json(json::parse(text));
        CHECK(topology_to_json(back).dump(2) == text);
        CHECK(back.width() == t.width());
        CHECK(back.paths().size() == t.paths().size());
    }
}

TEST_CASE("topology parsing reports the missing key") {
    json j;
    j["signal_len"] = 4;
    j["nodes"] = {"root", "leaf"};
    j["root"] = "root";
    // "leaves" intentionally absent.
    j["edges"] = json::array();
    try {
        topology_from_json(j);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("leaves") != std::string::npos);
    }
}

TEST_CASE("factor family serialization round-trips") {
    FactorFamily f = diagonal_family(2, 3);
    const std::string text = factors_to_json(f).dump(2);
    FactorFamily back = factors_from_json(json::parse(text));
    CHECK(factors_to_json(back).dump(2) == text);
    Rng rng(75, 0);
    ParamStack h = tlt::random_stack(2, 3, rng);
    CHECK(eval_product(back, h).isApprox(eval_product(f, h)));
}

TEST_CASE("topology parsing rejects a wrong declared depth") {
    json j = topology_to_json(make_haar_topology(2, 8));
    j["depth"] = 3;
    try {
        topology_from_json(j);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("depth") != std::string::npos);
    }
}

TEST_CASE("parallel depth-one leaves concatenate circulant blocks") {
    std::vector<ConvEdge> edges = {
        {"u", "root", 1, {0, 3}},
        {"v", "root", 1, {1, 2}},
    };
    ConvTopology t(6, {"root", "u", "v"}, "root", {"u", "v"}, std::move(edges));
    REQUIRE(t.width() == 4);

    FactorFamily f = assemble_factors(t);
    Rng rng(76, 0);
    for (int trial = 0; trial < 10; ++trial) {
        ParamStack h = tlt::random_stack(1, 4, rng);
        Eigen::MatrixXd M = eval_product(f, h);
        REQUIRE(M.rows() == 6);
        REQUIRE(M.cols() == 12);

        Eigen::VectorXd ku = Eigen::VectorXd::Zero(6), kv = Eigen::VectorXd::Zero(6);
        ku(0) = h(0, 0);
        ku(3) = h(0, 1);
        kv(1) = h(0, 2);
        kv(2) = h(0, 3);
        for (int j = 0; j < 6; ++j) {
            CHECK((M.col(j) - translate(ku, j)).norm() <= 1e-14);
            CHECK((M.col(6 + j) - translate(kv, j)).norm() <= 1e-14);
        }
    }
}

TEST_CASE("network recovery stays within the stability bound") {
    // End-to-end audit: fit noisy products of sup-normalized stacks and check
    // the recovered parameters against the closed-form distance bound.
    const ConvTopology t = make_haar_topology(2, 8);
    const FactorFamily f = assemble_factors(t);
    const ModelCollection model = make_full_model(t.depth(), t.width());
    SolverSettings solver;
    solver.restarts = 4;
    solver.max_sweeps = 60;
    const double delta = 0.1;

    int checked = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(77, seed);
        ParamStack hbar(rng.normal_matrix(t.depth(), t.width()));
        for (int k = 0; k < hbar.depth(); ++k) {
            const double sup = hbar.layer(k).cwiseAbs().maxCoeff();
            REQUIRE(sup > 0.0);
            hbar.layer(k) /= sup;
        }

        Eigen::MatrixXd E = rng.normal_matrix(8, 8);
        Eigen::MatrixXd X = eval_product(f, hbar) + delta * E / E.norm();

        FitResult fit = fit_factors(f, X, model, solver, 1000 + seed);
        NetworkBound nb = convnet_stability_bound(t, 2.0, 1.0, delta, fit.residual, &hbar);
        if (!nb.snr_ok || !nb.eps_ok || !fit.params.is_nondegenerate()) continue;

        const double d = network_class_distance(t, hbar, fit.params, 2.0);
        REQUIRE(d <= nb.bound + 1e-9);
        ++checked;
    }
    CHECK(checked >= 95);
}
