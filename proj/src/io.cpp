#include "hqsat/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace hqsat {

namespace {

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Matrix matrix_from_json(const Json& rows, Eigen::Index expect_cols = -1) {
    if (!rows.is_array()) throw DomainError("expected a nested array for a matrix");
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::Index cols = expect_cols;
    if (cols < 0) cols = n ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
    Matrix m(n, cols);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Json& row = rows.at(static_cast<std::size_t>(i));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw DomainError("ragged matrix in JSON document");
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
    }
    return m;
}

Vector vector_from_json(const Json& arr) {
    if (!arr.is_array()) throw DomainError("expected an array for a vector");
    Vector v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return os;
}

void finish(std::ofstream& os, const std::filesystem::path& path) {
    os.flush();
    if (!os) throw std::runtime_error("write to '" + path.string() + "' failed");
}

}  // namespace

Json gmm_to_json(const GmmModel& model, double floor, const std::vector<double>& loglik) {
    Json doc;
    doc["dim"] = model.dim;
    Json weights = Json::array(), means = Json::array(), covs = Json::array();
    for (const auto& c : model.components) {
        weights.push_back(c.weight);
        means.push_back(vector_to_json(c.mean));
        covs.push_back(matrix_to_json(c.covariance));
    }
    doc["weights"] = std::move(weights);
    doc["means"] = std::move(means);
    doc["covariances"] = std::move(covs);
    doc["floor"] = floor;
    doc["trace"] = {{"loglik", loglik}};
    return doc;
}

GmmModel gmm_from_json(const Json& doc) {
    GmmModel m;
    m.dim = doc.at("dim").get<int>();
    const Json& w = doc.at("weights");
    const Json& mu = doc.at("means");
    const Json& cov = doc.at("covariances");
    if (w.size() != mu.size() || w.size() != cov.size()) throw DomainError("mixture arrays differ in length");
    for (std::size_t r = 0; r < w.size(); ++r) {
        GaussianComponent c;
        c.weight = w[r].get<double>();
        c.mean = vector_from_json(mu[r]);
        c.covariance = matrix_from_json(cov[r], m.dim);
        m.components.push_back(std::move(c));
    }
    double total = m.total_weight();
    m.normalized = std::abs(total - 1.0) < 1e-12;
    m.validate();
    return m;
}

Json mlp_to_json(const MlpParams& net) {
    Json doc;
    doc["layer_sizes"] = net.layer_sizes;
    Json w = Json::array(), b = Json::array();
    for (std::size_t l = 0; l < net.layers(); ++l) {
        w.push_back(matrix_to_json(net.weights[l]));
        b.push_back(vector_to_json(net.biases[l]));
    }
    doc["weights"] = std::move(w);
    doc["biases"] = std::move(b);
    doc["activation"] = to_string(net.activation);
    return doc;
}

MlpParams mlp_from_json(const Json& doc) {
    MlpParams net;
    net.layer_sizes = doc.at("layer_sizes").get<std::vector<int>>();
    net.activation = activation_from_string(doc.at("activation").get<std::string>());
    const Json& w = doc.at("weights");
    const Json& b = doc.at("biases");
    if (net.layer_sizes.size() < 2 || w.size() + 1 != net.layer_sizes.size() || b.size() != w.size())
        throw DomainError("network document has inconsistent layer counts");
    for (std::size_t l = 0; l < w.size(); ++l) {
        net.weights.push_back(matrix_from_json(w[l], net.layer_sizes[l]));
        net.biases.push_back(vector_from_json(b[l]));
    }
    net.validate();
    return net;
}

Json ae_to_json(const AeParams& ae) { return Json{{"encoder", mlp_to_json(ae.encoder)}, {"decoder", mlp_to_json(ae.decoder)}}; }

AeParams ae_from_json(const Json& doc) {
    AeParams ae{mlp_from_json(doc.at("encoder")), mlp_from_json(doc.at("decoder"))};
    ae.validate();
    return ae;
}

Json hyper_to_json(const DagmmHyper& h) {
    Json doc;
    doc["lambda_tilde"] = h.lambda_tilde;
    doc["rho_tilde"] = h.rho_tilde;
    doc["r_count"] = h.r_count;
    doc["init_restarts"] = h.init_restarts;
    doc["outer_iters"] = h.outer_iters;
    doc["net_steps_per_outer"] = h.net_steps_per_outer;
    doc["step"] = h.step;
    doc["tol"] = h.tol;
    doc["seed"] = h.seed;
    return doc;
}

Json state_to_json(const DagmmState& s) {
    Json doc;
    doc["autoencoder"] = ae_to_json(s.ae);
    doc["latent_gmm"] = gmm_to_json(s.latent_gmm, s.floor);
    doc["hyper"] = hyper_to_json(s.hyper);
    doc["latent_codes"] = matrix_to_json(s.latent_codes);
    doc["duals"] = matrix_to_json(s.duals);
    return doc;
}

DagmmState state_from_json(const Json& doc) {
    DagmmState s;
    s.ae = ae_from_json(doc.at("autoencoder"));
    s.latent_gmm = gmm_from_json(doc.at("latent_gmm"));
    s.floor = doc.at("latent_gmm").at("floor").get<double>();
    const Json& h = doc.at("hyper");
    s.hyper.lambda_tilde = h.at("lambda_tilde").get<double>();
    s.hyper.rho_tilde = h.at("rho_tilde").get<double>();
    s.hyper.r_count = h.at("r_count").get<int>();
    s.hyper.init_restarts = h.at("init_restarts").get<int>();
    s.hyper.outer_iters = h.at("outer_iters").get<int>();
    s.hyper.net_steps_per_outer = h.at("net_steps_per_outer").get<int>();
    s.hyper.step = h.at("step").get<double>();
    s.hyper.tol = h.at("tol").get<double>();
    s.hyper.seed = h.at("seed").get<std::uint64_t>();
    const auto d = static_cast<Eigen::Index>(s.ae.latent_dim());
    s.latent_codes = matrix_from_json(doc.at("latent_codes"), d);
    s.duals = matrix_from_json(doc.at("duals"), d);
    return s;
}

void write_json(const Json& doc, const std::filesystem::path& path) {
    auto os = open_out(path);
    os << doc.dump(2) << '\n';
    finish(os, path);
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
    return Json::parse(is);
}

void write_loss_trace_csv(const std::vector<double>& loss, const std::filesystem::path& path) {
    auto os = open_out(path);
    os << "epoch,loss\n";
    for (std::size_t e = 0; e < loss.size(); ++e) os << e << ',' << format_double(loss[e]) << '\n';
    finish(os, path);
}

void write_em_trace_csv(const EmTrace& trace, const std::filesystem::path& path) {
    auto os = open_out(path);
    os << "iter,loglik\n";
    for (std::size_t i = 0; i < trace.loglik.size(); ++i) os << i << ',' << format_double(trace.loglik[i]) << '\n';
    finish(os, path);
}

void write_train_report_csv(const TrainReport& rep, const std::filesystem::path& path) {
    auto os = open_out(path);
    os << "iter,aug_lagrangian,recon,nll,violation\n";
    for (const auto& r : rep.rows)
        os << r.iter << ',' << format_double(r.aug_lagrangian) << ',' << format_double(r.recon) << ','
           << format_double(r.nll) << ',' << format_double(r.violation) << '\n';
    finish(os, path);
}

void write_labels_csv(const std::vector<int>& labels, const std::filesystem::path& path) {
    auto os = open_out(path);
    os << "label\n";
    for (int l : labels) os << l << '\n';
    finish(os, path);
}

std::vector<int> read_labels_csv(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(is, line) || line != "label") throw ParseError("expected header 'label'", 1);
    std::vector<int> out;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        int v = 0;
        const auto res = std::from_chars(line.data(), line.data() + line.size(), v);
        if (res.ec != std::errc() || res.ptr != line.data() + line.size()) throw ParseError("bad label '" + line + "'", lineno);
        out.push_back(v);
    }
    return out;
}

namespace {

CurveTable table_of(const CapacityCurve& curve) {
    CurveTable t;
    t.snr_db = curve.snr_db;
    for (std::size_t j = 0; j < curve.methods.size(); ++j) {
        t.methods.push_back(to_string(curve.methods[j]));
        std::vector<double> col;
        for (const auto& c : curve.cells[j]) col.push_back(c.present ? c.rate : std::numeric_limits<double>::quiet_NaN());
        t.rate.push_back(std::move(col));
    }
    return t;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

void write_curve_csv(const CapacityCurve& curve, const std::filesystem::path& path) {
    auto os = open_out(path);
    os << "snr_db";
    for (Method m : curve.methods) os << ",rate_" << to_string(m);
    for (Method m : curve.methods) os << ",stderr_" << to_string(m);
    os << '\n';
    for (std::size_t i = 0; i < curve.snr_db.size(); ++i) {
        os << format_double(curve.snr_db[i]);
        for (std::size_t j = 0; j < curve.methods.size(); ++j) {
            os << ',';
            if (curve.cells[j][i].present) os << format_double(curve.cells[j][i].rate);
        }
        for (std::size_t j = 0; j < curve.methods.size(); ++j) {
            os << ',';
            if (curve.cells[j][i].present) os << format_double(curve.cells[j][i].std_error);
        }
        os << '\n';
    }
    finish(os, path);
}

CurveTable read_curve_csv(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(is, line)) throw ParseError("missing header", 1);
    const auto head = split_csv(line);
    if (head.empty() || head[0] != "snr_db") throw ParseError("header must start with snr_db", 1);
    CurveTable t;
    std::vector<std::size_t> cols;
    for (std::size_t c = 1; c < head.size(); ++c)
        if (head[c].rfind("rate_", 0) == 0) {
            t.methods.push_back(head[c].substr(5));
            cols.push_back(c);
        }
    t.rate.resize(t.methods.size());
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != head.size()) throw ParseError("field count does not match header", lineno);
        auto num = [&](const std::string& s) {
            if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
            double v = 0.0;
            const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
            if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError("bad number '" + s + "'", lineno);
            return v;
        };
        t.snr_db.push_back(num(cells[0]));
        for (std::size_t j = 0; j < cols.size(); ++j) t.rate[j].push_back(num(cells[cols[j]]));
    }
    return t;
}

namespace {

constexpr std::array<const char*, 10> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string svg_open(double w, double h, const SvgOptions& opts) {
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    if (opts.timestamp) {
        const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        os << "<!-- generated " << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << " -->\n";
    }
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w) << "\" height=\"" << fmt(h)
       << "\" viewBox=\"0 0 " << fmt(w) << ' ' << fmt(h) << "\" font-family=\"sans-serif\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!opts.title.empty())
        os << "<text x=\"" << fmt(w / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(opts.title)
           << "</text>\n";
    return os.str();
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v) {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    void pad() {
        if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
        if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
        const double m = 0.05 * (hi - lo);
        lo -= m;
        hi += m;
    }
};

}  // namespace

std::string scatter_svg(const Matrix& data, const std::vector<std::vector<int>>& label_sets,
                        const std::vector<std::string>& captions, const SvgOptions& opts) {
    if (data.cols() < 2) throw DomainError("scatter_svg: need at least 2 columns");
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < std::min<int>(3, static_cast<int>(data.cols())); ++a)
        for (int b = a + 1; b < std::min<int>(3, static_cast<int>(data.cols())); ++b) pairs.emplace_back(a, b);
    const double panel = 260.0, gap = 30.0, top = 40.0;
    const auto rows = std::max<std::size_t>(1, label_sets.size());
    const double w = gap + static_cast<double>(pairs.size()) * (panel + gap);
    const double h = top + static_cast<double>(rows) * (panel + gap + 20.0);
    std::ostringstream os;
    os << svg_open(w, h, opts);
    for (std::size_t row = 0; row < rows; ++row) {
        const double y0 = top + static_cast<double>(row) * (panel + gap + 20.0) + 20.0;
        if (row < captions.size())
            os << "<text x=\"" << fmt(gap) << "\" y=\"" << fmt(y0 - 6) << "\" font-size=\"12\">" << escape(captions[row])
               << "</text>\n";
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            const auto [a, b] = pairs[p];
            const double x0 = gap + static_cast<double>(p) * (panel + gap);
            Range rx, ry;
            for (Eigen::Index i = 0; i < data.rows(); ++i) rx.add(data(i, a)), ry.add(data(i, b));
            rx.pad();
            ry.pad();
            os << "<g>\n<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y0) << "\" width=\"" << fmt(panel) << "\" height=\""
               << fmt(panel) << "\" fill=\"none\" stroke=\"black\"/>\n";
            os << "<text x=\"" << fmt(x0 + panel / 2) << "\" y=\"" << fmt(y0 + panel + 14) << "\" text-anchor=\"middle\" font-size=\"11\">d"
               << a << "</text>\n";
            os << "<text x=\"" << fmt(x0 - 6) << "\" y=\"" << fmt(y0 + panel / 2) << "\" text-anchor=\"end\" font-size=\"11\">d" << b
               << "</text>\n";
            for (Eigen::Index i = 0; i < data.rows(); ++i) {
                if (!std::isfinite(data(i, a)) || !std::isfinite(data(i, b))) continue;
                const double px = x0 + (data(i, a) - rx.lo) / (rx.hi - rx.lo) * panel;
                const double py = y0 + panel - (data(i, b) - ry.lo) / (ry.hi - ry.lo) * panel;
                int lab = 0;
                if (row < label_sets.size() && static_cast<std::size_t>(i) < label_sets[row].size())
                    lab = label_sets[row][static_cast<std::size_t>(i)];
                os << "<circle cx=\"" << fmt(px) << "\" cy=\"" << fmt(py) << "\" r=\"1.5\" fill=\""
                   << kPalette[static_cast<std::size_t>(std::abs(lab)) % kPalette.size()] << "\"/>\n";
            }
            os << "</g>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

std::string curve_svg(const CurveTable& t, const SvgOptions& opts) {
    const double w = 640, h = 420, left = 70, right = 150, top = 40, bottom = 50;
    const double pw = w - left - right, ph = h - top - bottom;
    Range rx, ry;
    for (double v : t.snr_db) rx.add(v);
    for (const auto& col : t.rate)
        for (double v : col) ry.add(v);
    rx.pad();
    ry.pad();
    auto X = [&](double v) { return left + (v - rx.lo) / (rx.hi - rx.lo) * pw; };
    auto Y = [&](double v) { return top + ph - (v - ry.lo) / (ry.hi - ry.lo) * ph; };

    std::ostringstream os;
    os << svg_open(w, h, opts);
    os << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double vx = rx.lo + (rx.hi - rx.lo) * k / 4.0;
        const double vy = ry.lo + (ry.hi - ry.lo) * k / 4.0;
        os << "<text x=\"" << fmt(X(vx)) << "\" y=\"" << fmt(top + ph + 16) << "\" text-anchor=\"middle\" font-size=\"10\">"
           << fmt(vx) << "</text>\n";
        os << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(Y(vy) + 3) << "\" text-anchor=\"end\" font-size=\"10\">"
           << fmt(vy) << "</text>\n";
    }
    os << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(h - 12) << "\" text-anchor=\"middle\" font-size=\"12\">SNR (dB)</text>\n";
    os << "<text x=\"16\" y=\"" << fmt(top + ph / 2) << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
       << fmt(top + ph / 2) << ")\">achievable rate (bits/use)</text>\n";
    for (std::size_t j = 0; j < t.methods.size(); ++j) {
        const char* color = kPalette[j % kPalette.size()];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < t.snr_db.size(); ++i) {
            if (!std::isfinite(t.rate[j][i])) continue;
            os << (first ? "" : " ") << fmt(X(t.snr_db[i])) << ',' << fmt(Y(t.rate[j][i]));
            first = false;
        }
        os << "\"/>\n";
        for (std::size_t i = 0; i < t.snr_db.size(); ++i)
            if (std::isfinite(t.rate[j][i]))
                os << "<circle cx=\"" << fmt(X(t.snr_db[i])) << "\" cy=\"" << fmt(Y(t.rate[j][i])) << "\" r=\"3\" fill=\"" << color
                   << "\"/>\n";
        const double ly = top + 14 + 18 * static_cast<double>(j);
        os << "<line x1=\"" << fmt(left + pw + 12) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(left + pw + 36) << "\" y2=\""
           << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << fmt(left + pw + 42) << "\" y=\"" << fmt(ly + 4) << "\" font-size=\"11\">" << escape(t.methods[j])
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string curve_svg(const CapacityCurve& curve, const SvgOptions& opts) { return curve_svg(table_of(curve), opts); }

void write_text(const std::string& text, const std::filesystem::path& path) {
    auto os = open_out(path);
    os << text;
    finish(os, path);
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::array<char, 1 << 16> buf{};
    while (is) {
        is.read(buf.data(), buf.size());
        if (is.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(is.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx, md.data(), &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

}  // namespace hqsat
