#include "hbes/solver.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hbes {
namespace {

// Shortest decimal text that parses back to the same double.
std::string num(double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

bool usable_name(const std::string& s) {
    if (s.empty() || s.size() > 8) return false;
    for (char ch : s)
        if (ch <= ' ' || ch > '~') return false;
    return true;
}

// Keeps caller names that fit the fixed format, otherwise falls back to
// prefix + zero-padded index. Fallbacks never collide with kept names.
std::vector<std::string> assign_names(const std::vector<std::string>& given, Index count, char prefix) {
    std::vector<std::string> out(static_cast<std::size_t>(count));
    std::set<std::string> seen;
    for (Index k = 0; k < count; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        if (ku < given.size() && usable_name(given[ku]) && given[ku][0] != prefix && seen.insert(given[ku]).second)
            out[ku] = given[ku];
    }
    for (Index k = 0; k < count; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        if (!out[ku].empty()) continue;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%c%07lld", prefix, static_cast<long long>(k));
        out[ku] = buf;
    }
    return out;
}

// Fixed-format field layout: columns 2-3, 5-12, 15-22, 25-36, 40-47, 50-61.
// Numeric fields wider than 12 characters spill to the right; the reader
// tokenizes on whitespace so both forms round-trip.
std::string line(const std::string& f1, const std::string& f2, const std::string& f3 = {},
                 const std::string& f4 = {}) {
    std::string s = " " + f1;
    s.resize(4, ' ');
    s += f2;
    if (!f3.empty()) {
        if (s.size() < 14) s.resize(14, ' ');
        s += f3;
        if (s.size() < 24) s.resize(24, ' ');
        else s += ' ';
        s += f4;
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
}

}  // namespace

std::string export_mps(const StandardFormProgram& p, const std::string& name) {
    p.check();
    const Index n = p.num_vars();
    const auto cols = assign_names(p.names, n, 'C');
    const auto rin = assign_names(p.row_names_in, p.num_in(), 'L');
    const auto req = assign_names(p.row_names_eq, p.num_eq(), 'E');

    // Column-wise access to both row blocks.
    const Eigen::SparseMatrix<double> Ain(p.A_in), Aeq(p.A_eq);

    std::ostringstream os;
    os << "NAME          " << name << "\n";
    os << "ROWS\n";
    os << line("N", "COST");
    for (const auto& r : req) os << line("E", r);
    for (const auto& r : rin) os << line("L", r);

    os << "COLUMNS\n";
    bool in_int = false;
    int marker = 0;
    for (Index j = 0; j < n; ++j) {
        const bool is_bin = !p.binary.empty() && p.binary[static_cast<std::size_t>(j)];
        if (is_bin != in_int) {
            char mk[16];
            std::snprintf(mk, sizeof(mk), "M%07d", marker++);
            os << line("", mk, "'MARKER'", is_bin ? "'INTORG'" : "'INTEND'");
            in_int = is_bin;
        }
        const auto& cn = cols[static_cast<std::size_t>(j)];
        bool any = false;
        if (p.c[j] != 0.0) {
            os << line("", cn, "COST", num(p.c[j]));
            any = true;
        }
        for (Eigen::SparseMatrix<double>::InnerIterator it(Aeq, j); it; ++it) {
            os << line("", cn, req[static_cast<std::size_t>(it.row())], num(it.value()));
            any = true;
        }
        for (Eigen::SparseMatrix<double>::InnerIterator it(Ain, j); it; ++it) {
            os << line("", cn, rin[static_cast<std::size_t>(it.row())], num(it.value()));
            any = true;
        }
        if (!any) os << line("", cn, "COST", "0");
    }
    if (in_int) {
        char mk[16];
        std::snprintf(mk, sizeof(mk), "M%07d", marker++);
        os << line("", mk, "'MARKER'", "'INTEND'");
    }

    os << "RHS\n";
    if (p.offset != 0.0) os << line("", "RHS", "COST", num(-p.offset));
    for (Index r = 0; r < p.num_eq(); ++r)
        if (p.b_eq[r] != 0.0) os << line("", "RHS", req[static_cast<std::size_t>(r)], num(p.b_eq[r]));
    for (Index r = 0; r < p.num_in(); ++r)
        if (p.b_in[r] != 0.0) os << line("", "RHS", rin[static_cast<std::size_t>(r)], num(p.b_in[r]));

    os << "BOUNDS\n";
    for (Index j = 0; j < n; ++j) {
        const auto& cn = cols[static_cast<std::size_t>(j)];
        const double l = p.lb[j], u = p.ub[j];
        const bool is_bin = !p.binary.empty() && p.binary[static_cast<std::size_t>(j)];
        if (is_bin && l == 0.0 && u == 1.0) {
            os << line("BV", "BND", cn);
            continue;
        }
        if (l == u) {
            os << line("FX", "BND", cn, num(l));
            continue;
        }
        if (!std::isfinite(l) && !std::isfinite(u)) {
            os << line("FR", "BND", cn);
            continue;
        }
        if (!std::isfinite(l)) os << line("MI", "BND", cn);
        else if (l != 0.0 || is_bin) os << line("LO", "BND", cn, num(l));
        if (std::isfinite(u)) os << line("UP", "BND", cn, num(u));
        else if (is_bin) os << line("PL", "BND", cn);
    }

    if (p.has_quadratic()) {
        os << "QUADOBJ\n";
        for (Index j = 0; j < n; ++j)
            if (p.q[j] != 0.0) {
                const auto& cn = cols[static_cast<std::size_t>(j)];
                os << line("", cn, cn, num(p.q[j]));
            }
    }
    os << "ENDATA\n";
    return os.str();
}

StandardFormProgram import_mps(const std::string& text) {
    enum class Sec { None, Rows, Columns, Rhs, Bounds, Quad } sec = Sec::None;
    struct RowInfo {
        char type;
        Index index;
    };
    std::map<std::string, RowInfo> rows;
    std::string obj_row;
    std::map<std::string, Index> col_index;
    ProgramBuilder b;
    std::vector<std::vector<ProgramBuilder::Term>> eq_terms, in_terms;
    std::vector<double> eq_rhs, in_rhs;
    std::vector<std::string> eq_names, in_names;
    std::vector<char> in_sign;  // +1 for L rows, -1 for G rows
    bool integer = false;
    std::vector<char> touched;

    auto parse = [](const std::string& s) {
        double v = 0.0;
        auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size())
            throw std::runtime_error("mps: bad number '" + s + "'");
        return v;
    };
    auto col = [&](const std::string& nm) -> Index {
        auto it = col_index.find(nm);
        if (it == col_index.end()) throw std::runtime_error("mps: unknown column " + nm);
        return it->second;
    };

    std::istringstream is(text);
    std::string ln;
    while (std::getline(is, ln)) {
        if (ln.empty() || ln[0] == '*') continue;
        std::istringstream ls(ln);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        if (ln[0] != ' ') {
            const std::string& h = tok[0];
            if (h == "NAME") sec = Sec::None;
            else if (h == "ROWS") sec = Sec::Rows;
            else if (h == "COLUMNS") sec = Sec::Columns;
            else if (h == "RHS") sec = Sec::Rhs;
            else if (h == "BOUNDS") sec = Sec::Bounds;
            else if (h == "QUADOBJ" || h == "QMATRIX") sec = Sec::Quad;
            else if (h == "ENDATA") break;
            else throw std::runtime_error("mps: unknown section " + h);
            continue;
        }
        switch (sec) {
            case Sec::Rows: {
                if (tok.size() != 2) throw std::runtime_error("mps: malformed ROWS line");
                const char t = tok[0][0];
                if (t == 'N') {
                    if (obj_row.empty()) obj_row = tok[1];
                } else if (t == 'E') {
                    rows[tok[1]] = {t, static_cast<Index>(eq_terms.size())};
                    eq_terms.emplace_back();
                    eq_rhs.push_back(0.0);
                    eq_names.push_back(tok[1]);
                } else if (t == 'L' || t == 'G') {
                    rows[tok[1]] = {t, static_cast<Index>(in_terms.size())};
                    in_terms.emplace_back();
                    in_rhs.push_back(0.0);
                    in_names.push_back(tok[1]);
                    in_sign.push_back(t == 'L' ? 1 : -1);
                } else {
                    throw std::runtime_error("mps: unsupported row type " + tok[0]);
                }
                break;
            }
            case Sec::Columns: {
                if (tok.size() >= 3 && tok[1] == "'MARKER'") {
                    integer = tok[2] == "'INTORG'";
                    break;
                }
                if (tok.size() != 3 && tok.size() != 5) throw std::runtime_error("mps: malformed COLUMNS line");
                auto it = col_index.find(tok[0]);
                Index j;
                if (it == col_index.end()) {
                    j = b.add_var(tok[0], 0.0, integer ? 1.0 : kInf, 0.0, integer);
                    col_index[tok[0]] = j;
                    touched.push_back(false);
                } else {
                    j = it->second;
                }
                for (std::size_t k = 1; k + 1 < tok.size(); k += 2) {
                    const double v = parse(tok[k + 1]);
                    if (tok[k] == obj_row) {
                        b.add_cost(j, v);
                        continue;
                    }
                    auto r = rows.find(tok[k]);
                    if (r == rows.end()) throw std::runtime_error("mps: unknown row " + tok[k]);
                    const auto ri = static_cast<std::size_t>(r->second.index);
                    if (r->second.type == 'E') eq_terms[ri].push_back({j, v});
                    else in_terms[ri].push_back({j, v * in_sign[ri]});
                }
                break;
            }
            case Sec::Rhs: {
                if (tok.size() != 3 && tok.size() != 5) throw std::runtime_error("mps: malformed RHS line");
                for (std::size_t k = 1; k + 1 < tok.size(); k += 2) {
                    const double v = parse(tok[k + 1]);
                    if (tok[k] == obj_row) {
                        b.add_offset(-v);
                        continue;
                    }
                    auto r = rows.find(tok[k]);
                    if (r == rows.end()) throw std::runtime_error("mps: unknown row " + tok[k]);
                    const auto ri = static_cast<std::size_t>(r->second.index);
                    if (r->second.type == 'E') eq_rhs[ri] = v;
                    else in_rhs[ri] = v * in_sign[ri];
                }
                break;
            }
            case Sec::Bounds: {
                if (tok.size() < 3) throw std::runtime_error("mps: malformed BOUNDS line");
                const std::string& t = tok[0];
                const Index j = col(tok[2]);
                const double v = tok.size() > 3 ? parse(tok[3]) : 0.0;
                double l = b.lower(j), u = b.upper(j);
                auto& first = touched[static_cast<std::size_t>(j)];
                // An explicit bound on an integer-marked column drops the implicit [0,1].
                if (!first && u == 1.0 && t != "BV") u = kInf;
                first = 1;
                if (t == "UP") u = v;
                else if (t == "LO") l = v;
                else if (t == "FX") l = u = v;
                else if (t == "FR") l = -kInf, u = kInf;
                else if (t == "MI") l = -kInf;
                else if (t == "PL") u = kInf;
                else if (t == "BV") l = 0.0, u = 1.0;
                else throw std::runtime_error("mps: unsupported bound type " + t);
                b.set_bounds(j, l, u);
                break;
            }
            case Sec::Quad: {
                if (tok.size() != 3) throw std::runtime_error("mps: malformed QUADOBJ line");
                if (tok[0] != tok[1]) throw std::runtime_error("mps: only diagonal quadratic terms are supported");
                b.add_quadratic(col(tok[0]), parse(tok[2]));
                break;
            }
            case Sec::None: throw std::runtime_error("mps: data line outside a section");
        }
    }
    for (std::size_t r = 0; r < eq_terms.size(); ++r) b.add_eq(eq_terms[r], eq_rhs[r], eq_names[r]);
    for (std::size_t r = 0; r < in_terms.size(); ++r) b.add_le(in_terms[r], in_rhs[r], in_names[r]);
    StandardFormProgram p = b.build();
    p.check();
    return p;
}

void write_solution_csv(std::ostream& os, const StandardFormProgram& p, const Solution& sol) {
    const auto fallback = assign_names({}, p.num_vars(), 'C');
    os << "name,value\n";
    for (Index j = 0; j < sol.x.size(); ++j) {
        const auto ju = static_cast<std::size_t>(j);
        os << (ju < p.names.size() && !p.names[ju].empty() ? p.names[ju] : fallback[ju]) << ',' << num(sol.x[j]) << '\n';
    }
}

}  // namespace hbes
