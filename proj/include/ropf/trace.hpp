#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ropf/dica.hpp"
#include "ropf/errors.hpp"

namespace ropf {

inline std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Writes the iteration trace as CSV, one row per (iteration, region),
/// ordered by iteration then region id. Byte-identical output for identical
/// traces. Refuses to write an empty trace.
inline void write_trace(const std::vector<IterationRecord>& records, const std::string& path) {
    if (records.empty()) throw IoError("refusing to write an empty trace");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open trace file for writing: " + path);
    f << "iter,region,primal_res,dual_res,local_obj,solver_iters,total_cost\n";
    for (const IterationRecord& rec : records) {
        for (size_t k = 0; k < rec.regions.size(); ++k) {
            const RegionIterationStats& s = rec.regions[k];
            f << rec.t << ',' << k << ',' << format_double(s.primal_res) << ','
              << format_double(s.dual_res) << ',' << format_double(s.local_obj) << ','
              << s.solver_iters << ',' << format_double(rec.total_cost) << '\n';
        }
    }
    f.flush();
    if (!f) throw IoError("failed writing trace file: " + path);
}

}  // namespace ropf
