#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <unordered_map>
#include <vector>

#include "ropf/errors.hpp"
#include "ropf/matpower.hpp"

namespace ropf {

/// The eight per-line coefficients of the polar flow equations. For a line
/// (i,j) with series admittance Y, charging susceptance b_ch and complex tap
/// T, the observing-end expansion of the branch pi-model gives
///
///   g_c_ij + i*b_c_ij = (Y* - i*b_ch/2) / |T|^2      (from end, self term)
///   g_ij   + i*b_ij   = Y* / T                       (from end, mutual term)
///   g_c_ji + i*b_c_ji = Y* - i*b_ch/2                (to end, self term)
///   g_ji   + i*b_ji   = Y* / T*                      (to end, mutual term)
struct LineCoefficients {
    double g_c_ij = 0, b_c_ij = 0, g_ij = 0, b_ij = 0;
    double g_c_ji = 0, b_c_ji = 0, g_ji = 0, b_ji = 0;
};

inline LineCoefficients line_coefficients(std::complex<double> y, double b_ch,
                                          std::complex<double> tap) {
    if (std::abs(tap) == 0.0) throw ZeroTapError();
    if (std::abs(y) == 0.0) throw ZeroAdmittanceError();
    const std::complex<double> yc = std::conj(y);
    const std::complex<double> half_charge(0.0, b_ch / 2.0);
    const double t2 = std::norm(tap);

    LineCoefficients c;
    const std::complex<double> from_self = (yc - half_charge) / t2;
    const std::complex<double> from_mutual = yc / tap;
    const std::complex<double> to_self = yc - half_charge;
    const std::complex<double> to_mutual = yc / std::conj(tap);
    c.g_c_ij = from_self.real();
    c.b_c_ij = from_self.imag();
    c.g_ij = from_mutual.real();
    c.b_ij = from_mutual.imag();
    c.g_c_ji = to_self.real();
    c.b_c_ji = to_self.imag();
    c.g_ji = to_mutual.real();
    c.b_ji = to_mutual.imag();
    return c;
}

struct Bus {
    int index = 0;        // dense 0-based id
    int original_id = 0;  // id from the case file, for reporting
    double p_d = 0, q_d = 0;
    double g_sh = 0, b_sh = 0;
    double v_min = 0, v_max = 0;
    bool is_ref = false;
};

struct Line {
    int index = 0;
    int from = 0, to = 0;  // dense bus indices
    std::complex<double> admittance;
    double b_ch = 0;
    std::complex<double> tap{1.0, 0.0};
    std::optional<double> s_max;        // apparent-power limit, absent = unconstrained
    double theta_min = -kInf;           // angle-difference bounds (from minus to)
    double theta_max = kInf;
    LineCoefficients coeffs;

    bool has_angle_limits() const { return std::isfinite(theta_min) || std::isfinite(theta_max); }
};

/// Per-unit generator; the cost polynomial is rescaled so that evaluating it
/// on per-unit power yields the same $/h as the case file's MW-based costs.
struct Generator {
    int index = 0;
    int bus = 0;
    double p_min = 0, p_max = 0;
    double q_min = 0, q_max = 0;
    double c2 = 0, c1 = 0, c0 = 0;

    double cost(double p) const { return (c2 * p + c1) * p + c0; }
};

/// Immutable per-unit network graph. Thread-safe to share after construction.
class Network {
  public:
    Network(double base_mva, std::vector<Bus> buses, std::vector<Line> lines,
            std::vector<Generator> gens)
        : base_mva_(base_mva),
          buses_(std::move(buses)),
          lines_(std::move(lines)),
          gens_(std::move(gens)) {
        lines_at_.resize(buses_.size());
        gens_at_.resize(buses_.size());
        for (const Line& l : lines_) {
            lines_at_[l.from].push_back(l.index);
            lines_at_[l.to].push_back(l.index);
        }
        for (const Generator& g : gens_) gens_at_[g.bus].push_back(g.index);
        for (size_t i = 0; i < buses_.size(); ++i) {
            if (buses_[i].is_ref) ref_bus_ = static_cast<int>(i);
        }
    }

    double base_mva() const { return base_mva_; }
    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Line>& lines() const { return lines_; }
    const std::vector<Generator>& generators() const { return gens_; }
    int ref_bus() const { return ref_bus_; }
    int num_buses() const { return static_cast<int>(buses_.size()); }

    /// Line ids incident to bus i (parallel lines kept distinct).
    const std::vector<int>& lines_at(int i) const { return lines_at_[i]; }
    const std::vector<int>& generators_at(int i) const { return gens_at_[i]; }

    /// All buses adjacent to i through some line, either orientation; sorted, deduplicated.
    std::vector<int> neighbors(int i) const {
        std::vector<int> out;
        for (int l : lines_at_[i]) out.push_back(lines_[l].from == i ? lines_[l].to : lines_[l].from);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

  private:
    double base_mva_;
    std::vector<Bus> buses_;
    std::vector<Line> lines_;
    std::vector<Generator> gens_;
    std::vector<std::vector<int>> lines_at_;
    std::vector<std::vector<int>> gens_at_;
    int ref_bus_ = -1;
};

/// Converts a raw case to the per-unit network model: MW and MVAr divide by
/// baseMVA, degrees become radians, out-of-service equipment is dropped,
/// zero tap ratios mean 1.0, rateA 0 means unconstrained, and angle bounds
/// of (0,0) or beyond +-360 degrees mean unconstrained.
inline Network to_network(const RawCase& rc) {
    if (rc.base_mva <= 0) throw CaseFormatError("baseMVA must be positive");
    const double sb = rc.base_mva;
    constexpr double deg = std::numbers::pi / 180.0;

    std::unordered_map<int, int> dense;
    std::vector<Bus> buses;
    int n_ref = 0;
    for (const BusRow& b : rc.bus_rows) {
        if (b.type == 4) throw IslandedBusError(b.id);
        if (dense.count(b.id)) throw CaseFormatError("duplicate bus id " + std::to_string(b.id));
        Bus bus;
        bus.index = static_cast<int>(buses.size());
        bus.original_id = b.id;
        bus.p_d = b.pd / sb;
        bus.q_d = b.qd / sb;
        bus.g_sh = b.gs / sb;
        bus.b_sh = b.bs / sb;
        bus.v_min = b.vmin;
        bus.v_max = b.vmax;
        bus.is_ref = b.type == 3;
        if (bus.v_min <= 0 || bus.v_min > bus.v_max)
            throw CaseFormatError("bus " + std::to_string(b.id) + " has invalid voltage bounds");
        n_ref += bus.is_ref;
        dense[b.id] = bus.index;
        buses.push_back(bus);
    }
    if (n_ref == 0) throw NoReferenceBusError();
    if (n_ref > 1) throw CaseFormatError("more than one reference bus");

    auto lookup = [&](int id, const char* what) {
        auto it = dense.find(id);
        if (it == dense.end())
            throw CaseFormatError(std::string(what) + " references unknown bus " + std::to_string(id));
        return it->second;
    };

    std::vector<Line> lines;
    for (const BranchRow& br : rc.branch_rows) {
        if (br.status == 0) continue;
        Line l;
        l.index = static_cast<int>(lines.size());
        l.from = lookup(br.from, "branch");
        l.to = lookup(br.to, "branch");
        if (l.from == l.to) throw CaseFormatError("branch with identical endpoints");
        if (br.r * br.r + br.x * br.x <= 0)
            throw CaseFormatError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                                  " has zero series impedance");
        l.admittance = 1.0 / std::complex<double>(br.r, br.x);
        l.b_ch = br.b_ch;
        const double ratio = br.ratio == 0.0 ? 1.0 : br.ratio;
        l.tap = std::polar(ratio, br.angle_deg * deg);
        if (br.rate_a > 0) l.s_max = br.rate_a / sb;
        if (!(br.angmin_deg == 0 && br.angmax_deg == 0)) {
            if (br.angmin_deg > -360) l.theta_min = br.angmin_deg * deg;
            if (br.angmax_deg < 360) l.theta_max = br.angmax_deg * deg;
        }
        l.coeffs = line_coefficients(l.admittance, l.b_ch, l.tap);
        lines.push_back(l);
    }

    std::vector<Generator> gens;
    for (size_t i = 0; i < rc.gen_rows.size(); ++i) {
        const GenRow& g = rc.gen_rows[i];
        if (g.status == 0) continue;
        Generator gen;
        gen.index = static_cast<int>(gens.size());
        gen.bus = lookup(g.bus, "generator");
        gen.p_min = g.pmin / sb;
        gen.p_max = g.pmax / sb;
        gen.q_min = g.qmin / sb;
        gen.q_max = g.qmax / sb;
        if (gen.p_min > gen.p_max || gen.q_min > gen.q_max)
            throw CaseFormatError("generator at bus " + std::to_string(g.bus) + " has inverted bounds");
        const GenCostRow& c = rc.gencost_rows[i];
        double c2 = 0, c1 = 0, c0 = 0;
        if (c.n == 3) {
            c2 = c.coeffs[0];
            c1 = c.coeffs[1];
            c0 = c.coeffs[2];
        } else if (c.n == 2) {
            c1 = c.coeffs[0];
            c0 = c.coeffs[1];
        } else {
            c0 = c.coeffs[0];
        }
        gen.c2 = c2 * sb * sb;
        gen.c1 = c1 * sb;
        gen.c0 = c0;
        gens.push_back(gen);
    }

    Network net(sb, std::move(buses), std::move(lines), std::move(gens));

    // connectivity of the in-service graph
    std::vector<char> seen(net.num_buses(), 0);
    std::vector<int> stack{net.ref_bus()};
    seen[net.ref_bus()] = 1;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int j : net.neighbors(u)) {
            if (!seen[j]) {
                seen[j] = 1;
                stack.push_back(j);
            }
        }
    }
    for (int i = 0; i < net.num_buses(); ++i) {
        if (!seen[i])
            throw DisconnectedGraphError("bus " + std::to_string(net.buses()[i].original_id) +
                                         " is not connected to the reference bus");
    }
    return net;
}

}  // namespace ropf
