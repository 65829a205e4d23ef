#pragma once

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ropf/errors.hpp"

namespace ropf {

/// One row of the `mpc.bus` table, in MATPOWER-native units (MW, MVAr, degrees).
struct BusRow {
    int id = 0;
    int type = 0;  // 1 PQ, 2 PV, 3 reference, 4 isolated
    double pd = 0, qd = 0;
    double gs = 0, bs = 0;
    double vm = 1, va_deg = 0;
    double vmax = 0, vmin = 0;
};

struct GenRow {
    int bus = 0;
    double pg = 0, qg = 0;
    double qmax = 0, qmin = 0;
    double pmax = 0, pmin = 0;
    int status = 1;
};

struct BranchRow {
    int from = 0, to = 0;
    double r = 0, x = 0, b_ch = 0;
    double rate_a = 0;
    double ratio = 0, angle_deg = 0;
    int status = 1;
    double angmin_deg = -360, angmax_deg = 360;
};

/// Polynomial cost row, coefficients highest degree first.
struct GenCostRow {
    int model = 2;
    double startup = 0, shutdown = 0;
    int n = 0;
    std::vector<double> coeffs;
};

struct RawCase {
    double base_mva = 0;
    std::vector<BusRow> bus_rows;
    std::vector<GenRow> gen_rows;
    std::vector<BranchRow> branch_rows;
    std::vector<GenCostRow> gencost_rows;
};

namespace detail {

inline std::string strip_comment(const std::string& line) {
    auto pos = line.find('%');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

inline bool is_blank(std::string_view s) {
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    return true;
}

/// Parses whitespace/comma separated numbers from one matrix row chunk.
inline std::vector<double> parse_numbers(const std::string& chunk, int line_no) {
    std::vector<double> out;
    const char* p = chunk.c_str();
    const char* end = p + chunk.size();
    while (p < end) {
        while (p < end && (std::isspace(static_cast<unsigned char>(*p)) || *p == ',')) ++p;
        if (p >= end) break;
        char* next = nullptr;
        double v = std::strtod(p, &next);
        if (next == p) throw MalformedRowError(line_no, "expected a number, got '" + std::string(p) + "'");
        out.push_back(v);
        p = next;
    }
    return out;
}

}  // namespace detail

/// Parses a MATPOWER case from text (the `mpc.<table> = [...]` matrix-assignment
/// format). Comments, tabs and scientific notation are tolerated; unknown tables
/// (bus_name, areas, ...) are skipped. Throws MissingTableError, MalformedRowError
/// or UnsupportedCostModelError.
inline RawCase parse_case(std::string_view text) {
    // raw numeric rows per known table
    std::unordered_map<std::string, std::vector<std::pair<int, std::vector<double>>>> tables;
    bool have_base = false;
    double base_mva = 0;

    std::string current;   // table currently being read ("" = none)
    bool skipping = false; // inside an unknown matrix or a cell array
    char skip_close = ']';

    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = detail::strip_comment(raw);
        if (detail::is_blank(line)) continue;

        if (skipping) {
            if (line.find(skip_close) != std::string::npos) skipping = false;
            continue;
        }

        if (current.empty()) {
            auto mpc = line.find("mpc.");
            if (mpc == std::string::npos) continue;
            size_t p = mpc + 4;
            std::string name;
            while (p < line.size() && (std::isalnum(static_cast<unsigned char>(line[p])) || line[p] == '_'))
                name += line[p++];
            while (p < line.size() && std::isspace(static_cast<unsigned char>(line[p]))) ++p;
            if (p >= line.size() || line[p] != '=') continue;
            ++p;
            while (p < line.size() && std::isspace(static_cast<unsigned char>(line[p]))) ++p;
            std::string rest = line.substr(p);

            if (name == "baseMVA") {
                auto semi = rest.find(';');
                if (semi != std::string::npos) rest = rest.substr(0, semi);
                auto nums = detail::parse_numbers(rest, line_no);
                if (nums.size() != 1) throw MalformedRowError(line_no, "baseMVA expects one number");
                base_mva = nums[0];
                have_base = true;
                continue;
            }
            if (rest.empty()) continue;
            if (rest[0] == '{') {
                skipping = rest.find('}') == std::string::npos;
                skip_close = '}';
                continue;
            }
            if (rest[0] != '[') continue;  // strings, scalars we do not care about
            bool known = name == "bus" || name == "gen" || name == "branch" || name == "gencost";
            if (!known) {
                skipping = rest.find(']') == std::string::npos;
                skip_close = ']';
                continue;
            }
            current = name;
            line = rest.substr(1);
            if (detail::is_blank(line)) continue;
        }

        // inside a known matrix: rows are chunks terminated by ';' or end of line
        bool closes = false;
        auto bracket = line.find(']');
        if (bracket != std::string::npos) {
            closes = true;
            line = line.substr(0, bracket);
        }
        size_t start = 0;
        while (start <= line.size()) {
            auto semi = line.find(';', start);
            std::string chunk =
                semi == std::string::npos ? line.substr(start) : line.substr(start, semi - start);
            if (!detail::is_blank(chunk))
                tables[current].emplace_back(line_no, detail::parse_numbers(chunk, line_no));
            if (semi == std::string::npos) break;
            start = semi + 1;
        }
        if (closes) current.clear();
    }

    if (!have_base) throw MissingTableError("baseMVA");
    for (const char* t : {"bus", "gen", "branch", "gencost"})
        if (!tables.count(t)) throw MissingTableError(t);

    RawCase rc;
    rc.base_mva = base_mva;

    for (auto& [ln, row] : tables["bus"]) {
        if (row.size() < 13) throw MalformedRowError(ln, "bus row needs 13 columns");
        BusRow b;
        b.id = static_cast<int>(row[0]);
        b.type = static_cast<int>(row[1]);
        b.pd = row[2];
        b.qd = row[3];
        b.gs = row[4];
        b.bs = row[5];
        b.vm = row[7];
        b.va_deg = row[8];
        b.vmax = row[11];
        b.vmin = row[12];
        rc.bus_rows.push_back(b);
    }
    for (auto& [ln, row] : tables["gen"]) {
        if (row.size() < 10) throw MalformedRowError(ln, "gen row needs 10 columns");
        GenRow g;
        g.bus = static_cast<int>(row[0]);
        g.pg = row[1];
        g.qg = row[2];
        g.qmax = row[3];
        g.qmin = row[4];
        g.status = static_cast<int>(row[7]);
        g.pmax = row[8];
        g.pmin = row[9];
        rc.gen_rows.push_back(g);
    }
    for (auto& [ln, row] : tables["branch"]) {
        if (row.size() < 11) throw MalformedRowError(ln, "branch row needs 11 columns");
        BranchRow b;
        b.from = static_cast<int>(row[0]);
        b.to = static_cast<int>(row[1]);
        b.r = row[2];
        b.x = row[3];
        b.b_ch = row[4];
        b.rate_a = row[5];
        b.ratio = row[8];
        b.angle_deg = row[9];
        b.status = static_cast<int>(row[10]);
        if (row.size() >= 13) {
            b.angmin_deg = row[11];
            b.angmax_deg = row[12];
        }
        rc.branch_rows.push_back(b);
    }
    for (auto& [ln, row] : tables["gencost"]) {
        if (row.size() < 4) throw MalformedRowError(ln, "gencost row needs at least 4 columns");
        GenCostRow c;
        c.model = static_cast<int>(row[0]);
        if (c.model != 2) throw UnsupportedCostModelError(c.model, "only polynomial (model 2) accepted");
        c.startup = row[1];
        c.shutdown = row[2];
        c.n = static_cast<int>(row[3]);
        if (c.n < 1 || c.n > 3)
            throw UnsupportedCostModelError(c.model, "polynomial degree above 2 not supported");
        if (row.size() < static_cast<size_t>(4 + c.n))
            throw MalformedRowError(ln, "gencost row shorter than its coefficient count");
        c.coeffs.assign(row.begin() + 4, row.begin() + 4 + c.n);
        rc.gencost_rows.push_back(c);
    }

    const size_t ng = rc.gen_rows.size();
    if (rc.gencost_rows.size() == 2 * ng) {
        rc.gencost_rows.resize(ng);  // reactive-power cost rows are ignored
    } else if (rc.gencost_rows.size() != ng) {
        throw CaseFormatError("gencost has " + std::to_string(rc.gencost_rows.size()) +
                              " rows for " + std::to_string(ng) + " generators");
    }
    return rc;
}

inline RawCase parse_case(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_case(std::string_view(ss.str()));
}

/// Reads and parses a case file from disk.
inline RawCase load_case(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open case file: " + path);
    return parse_case(f);
}

}  // namespace ropf
