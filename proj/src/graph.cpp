#include "kerl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "kerl/error.hpp"
#include "kerl/kernels.hpp"

namespace kerl::graph {

namespace {

void check_registry(const NodeRegistry& r) {
    std::set<std::string> seen(r.categories.begin(), r.categories.end());
    require(seen.size() == r.categories.size(), "duplicate category names in registry");
    std::set<std::string> seen_a(r.attributes.begin(), r.attributes.end());
    require(seen_a.size() == r.attributes.size(), "duplicate attribute names in registry");
}

void normalize_span(const double* in, double* out, std::size_t n, std::size_t stride) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        double v = in[i * stride];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi > lo) {
        double inv = 1.0 / (hi - lo);
        for (std::size_t i = 0; i < n; ++i) out[i * stride] = (in[i * stride] - lo) * inv;
    } else {
        // uniform support: maximally confident when positive, no edge when zero
        double v = hi > 0.0 ? 1.0 : 0.0;
        for (std::size_t i = 0; i < n; ++i) out[i * stride] = v;
    }
}

}  // namespace

ConfidenceMatrix normalize_scores(const Mat& raw, NormMode mode) {
    for (double v : raw.a) {
        if (!std::isfinite(v)) throw NumericError("normalize_scores: non-finite raw score");
        if (v < 0.0) throw NumericError("normalize_scores: negative raw score");
    }
    Mat out(raw.rows, raw.cols);
    if (raw.size() == 0) return {out};
    if (mode == NormMode::global) {
        normalize_span(raw.a.data(), out.a.data(), raw.size(), 1);
    } else {
        for (std::size_t j = 0; j < raw.cols; ++j)
            normalize_span(raw.a.data() + j, out.a.data() + j, raw.rows, raw.cols);
    }
    return {out};
}

KnowledgeGraph build_graph(const std::vector<Instance>& instances, NodeRegistry registry,
                           NormMode mode, BuildReport* report) {
    check_registry(registry);
    if (instances.empty()) throw std::invalid_argument("build_graph: empty instance list");
    const std::size_t C = registry.num_categories();
    const std::size_t A = registry.num_attributes();

    Mat raw(C, A);
    std::vector<std::size_t> counts(C, 0);
    for (const Instance& inst : instances) {
        require(inst.category < C, "build_graph: category index out of range");
        require(inst.attribute_scores.size() == A,
                "build_graph: attribute score vector length mismatch");
        for (double v : inst.attribute_scores) {
            if (!std::isfinite(v) || v < 0.0)
                throw NumericError("build_graph: attribute score must be finite and >= 0");
        }
        const auto& ks = kernels::ops();
        ks.axpy(1.0, inst.attribute_scores.data(), raw.row(inst.category), A);
        ++counts[inst.category];
    }

    if (report) {
        report->empty_categories.clear();
        for (std::size_t c = 0; c < C; ++c)
            if (counts[c] == 0) report->empty_categories.push_back(c);
        auto [lo, hi] = std::minmax_element(raw.a.begin(), raw.a.end());
        report->raw_min = raw.size() ? *lo : 0.0;
        report->raw_max = raw.size() ? *hi : 0.0;
    }

    return {std::move(registry), normalize_scores(raw, mode)};
}

AdjacencyPair adjacency(const KnowledgeGraph& g) {
    const std::size_t C = g.num_categories();
    const std::size_t A = g.num_attributes();
    const std::size_t V = C + A;
    AdjacencyPair p;
    p.a_c = Mat(V, V);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t a = 0; a < A; ++a) p.a_c.at(c, C + a) = g.s().at(c, a);
    p.a_full = Mat(V, 2 * V);
    for (std::size_t i = 0; i < V; ++i)
        for (std::size_t j = 0; j < V; ++j) {
            p.a_full.at(i, j) = p.a_c.at(i, j);
            p.a_full.at(i, V + j) = p.a_c.at(j, i);
        }
    return p;
}

void save_graph(const KnowledgeGraph& g, std::ostream& out) {
    const std::size_t C = g.num_categories();
    const std::size_t A = g.num_attributes();
    out << "kerl-graph 1\n";
    out << "categories " << C << "\n";
    out << "attributes " << A << "\n";
    for (const auto& n : g.registry.categories) out << "category " << n << "\n";
    for (const auto& n : g.registry.attributes) out << "attribute " << n << "\n";
    out << "matrix\n";
    char buf[64];
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t a = 0; a < A; ++a) {
            std::snprintf(buf, sizeof buf, "%.17g", g.s().at(c, a));
            out << buf << (a + 1 == A ? "" : " ");
        }
        out << "\n";
    }
}

void save_graph(const KnowledgeGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    save_graph(g, out);
    if (!out) throw IoError("write failed: " + path);
}

KnowledgeGraph load_graph(std::istream& in, const std::string& path) {
    long lineno = 0;
    std::string line;
    auto next_line = [&](const char* what) {
        if (!std::getline(in, line)) throw ParseError(path, lineno, msg("expected ", what));
        ++lineno;
        return line;
    };

    if (next_line("header") != "kerl-graph 1")
        throw ParseError(path, lineno, "bad header, expected 'kerl-graph 1'");

    auto parse_count = [&](const char* key) {
        std::istringstream is(next_line(key));
        std::string k;
        std::size_t n = 0;
        if (!(is >> k >> n) || k != key)
            throw ParseError(path, lineno, msg("expected '", key, " <count>'"));
        return n;
    };
    const std::size_t C = parse_count("categories");
    const std::size_t A = parse_count("attributes");

    NodeRegistry reg;
    auto parse_name = [&](const char* kind, std::vector<std::string>& out_names) {
        std::istringstream is(next_line(kind));
        std::string k, name;
        if (!(is >> k) || k != kind || !std::getline(is, name) || name.size() < 2)
            throw ParseError(path, lineno, msg("expected '", kind, " <name>'"));
        out_names.push_back(name.substr(1));  // skip separating space
    };
    for (std::size_t i = 0; i < C; ++i) parse_name("category", reg.categories);
    for (std::size_t i = 0; i < A; ++i) parse_name("attribute", reg.attributes);

    if (next_line("matrix marker") != "matrix")
        throw ParseError(path, lineno, "expected 'matrix'");

    Mat s(C, A);
    for (std::size_t c = 0; c < C; ++c) {
        std::istringstream is(next_line("matrix row"));
        for (std::size_t a = 0; a < A; ++a) {
            if (!(is >> s.at(c, a)))
                throw ParseError(path, lineno, msg("matrix row ", c, ": expected ", A,
                                                   " values, failed at column ", a));
        }
        double extra;
        if (is >> extra)
            throw ParseError(path, lineno, msg("matrix row ", c, ": more than ", A, " values"));
    }
    for (double v : s.a)
        if (!(v >= 0.0 && v <= 1.0))
            throw ParseError(path, lineno, "matrix entry outside [0,1]");
    return {std::move(reg), ConfidenceMatrix{std::move(s)}};
}

KnowledgeGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    return load_graph(in, path);
}

void export_dot(const KnowledgeGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "digraph knowledge {\n  rankdir=LR;\n";
    for (std::size_t c = 0; c < g.num_categories(); ++c)
        out << "  c" << c << " [label=\"" << g.registry.categories[c] << "\" shape=box];\n";
    for (std::size_t a = 0; a < g.num_attributes(); ++a)
        out << "  a" << a << " [label=\"" << g.registry.attributes[a] << "\"];\n";
    char buf[64];
    for (std::size_t c = 0; c < g.num_categories(); ++c)
        for (std::size_t a = 0; a < g.num_attributes(); ++a) {
            double w = g.s().at(c, a);
            if (w == 0.0) continue;
            std::snprintf(buf, sizeof buf, "%.4g", w);
            out << "  c" << c << " -> a" << a << " [label=\"" << buf << "\"];\n";
        }
    out << "}\n";
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace kerl::graph
