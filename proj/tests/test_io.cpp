#include "hqsat/io.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace hqsat;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "hqsat_test_io";
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_CASE("mixture JSON round trip is exact") {
    std::mt19937_64 rng(1);
    GmmModel m;
    m.dim = 3;
    for (int r = 0; r < 3; ++r) m.components.push_back({1.0 / 3.0, Vector::Random(3), oracle::random_spd(3, rng)});
    m = m.renormalized();
    const fs::path p = temp_dir() / "gmm.json";
    write_json(gmm_to_json(m, 1e-7, {-3.5, -3.25}), p);
    const Json doc = read_json(p);
    const GmmModel back = gmm_from_json(doc);
    CHECK(back.normalized);
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(back.components[r].weight == m.components[r].weight);
        CHECK(back.components[r].mean == m.components[r].mean);
        CHECK(back.components[r].covariance == m.components[r].covariance);
    }
    CHECK(doc["floor"].get<double>() == 1e-7);

    const GmmModel hqn = hqn_gmm_1d(HqnParams{});
    CHECK_FALSE(gmm_from_json(gmm_to_json(hqn)).normalized);
}

TEST_CASE("network and state round trip") {
    DagmmState s;
    s.ae = init_autoencoder({3, 5, 2, 5, 3}, Activation::tanh, 4);
    s.ae.encoder.biases[0].setRandom();
    s.latent_codes = Matrix::Random(7, 2);
    s.duals = Matrix::Random(7, 2) * 1e-3;
    GmmModel g;
    g.dim = 2;
    g.components.push_back({0.4, Vector::Random(2), Matrix::Identity(2, 2)});
    g.components.push_back({0.6, Vector::Random(2), 2.0 * Matrix::Identity(2, 2)});
    s.latent_gmm = g;
    s.hyper.lambda_tilde = 0.3;
    s.hyper.seed = 99;
    s.floor = 1e-9;
    const fs::path p = temp_dir() / "state.json";
    write_json(state_to_json(s), p);
    const DagmmState b = state_from_json(read_json(p));
    for (std::size_t l = 0; l < s.ae.encoder.layers(); ++l) {
        CHECK(b.ae.encoder.weights[l] == s.ae.encoder.weights[l]);
        CHECK(b.ae.encoder.biases[l] == s.ae.encoder.biases[l]);
        CHECK(b.ae.decoder.weights[l] == s.ae.decoder.weights[l]);
    }
    CHECK(b.ae.encoder.activation == Activation::tanh);
    CHECK(b.latent_codes == s.latent_codes);
    CHECK(b.duals == s.duals);
    CHECK(b.latent_gmm.components[1].mean == g.components[1].mean);
    CHECK(b.hyper.lambda_tilde == 0.3);
    CHECK(b.hyper.seed == 99);
    CHECK(b.floor == 1e-9);
    // Text form is stable too.
    write_json(state_to_json(b), temp_dir() / "state2.json");
    CHECK(slurp(p) == slurp(temp_dir() / "state2.json"));
}

TEST_CASE("CSV writers") {
    const fs::path dir = temp_dir();
    write_labels_csv({0, 2, 1}, dir / "labels.csv");
    CHECK(slurp(dir / "labels.csv") == "label\n0\n2\n1\n");
    CHECK(read_labels_csv(dir / "labels.csv") == std::vector<int>{0, 2, 1});

    EmTrace t;
    t.loglik = {-2.0, -1.5};
    write_em_trace_csv(t, dir / "em.csv");
    CHECK(slurp(dir / "em.csv") == "iter,loglik\n0,-2\n1,-1.5\n");

    TrainReport rep;
    rep.rows.push_back({0, 1.0, 0.5, 2.0, 0.25});
    write_train_report_csv(rep, dir / "train.csv");
    CHECK(slurp(dir / "train.csv") == "iter,aug_lagrangian,recon,nll,violation\n0,1,0.5,2,0.25\n");

    CapacityCurve c;
    c.snr_db = {0.0, 5.0};
    c.methods = {Method::baseline, Method::gmm};
    c.cells.assign(2, std::vector<CurveCell>(2));
    c.cells[0][0] = {true, 0.25, 0.01, 1.0, ""};
    c.cells[0][1] = {true, 0.75, 0.02, 1.0, ""};
    c.cells[1][0] = {true, 0.5, 0.03, 1.0, ""};
    write_curve_csv(c, dir / "curve.csv");
    CHECK(slurp(dir / "curve.csv") == "snr_db,rate_baseline,rate_gmm,stderr_baseline,stderr_gmm\n0,0.25,0.5,0.01,0.03\n5,0.75,,0.02,\n");
    const CurveTable table = read_curve_csv(dir / "curve.csv");
    CHECK(table.methods == std::vector<std::string>{"baseline", "gmm"});
    CHECK(table.rate[0] == std::vector<double>{0.25, 0.75});
    CHECK(std::isnan(table.rate[1][1]));
}

TEST_CASE("SVG output") {
    Matrix pts(4, 3);
    pts << 0, 0, 0, 1, 1, 1, 2, 0, 1, 0, 2, 2;
    const std::string with = scatter_svg(pts, {{0, 1, 0, 1}}, {"labels"}, {"t", true});
    const std::string without = scatter_svg(pts, {{0, 1, 0, 1}}, {"labels"}, {"t", false});
    CHECK(with.find("<!-- generated") != std::string::npos);
    CHECK(without.find("<!-- generated") == std::string::npos);
    CHECK(without == scatter_svg(pts, {{0, 1, 0, 1}}, {"labels"}, {"t", false}));
    CHECK(without.find("<svg") != std::string::npos);
    CHECK(without.find("</svg>") != std::string::npos);
    CHECK(without.find("circle") != std::string::npos);
}

TEST_CASE("digest") {
    const fs::path p = temp_dir() / "abc.txt";
    write_text("abc", p);
    CHECK(sha256_file(p) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
