#include "closedobs/timeseries.hpp"

#include "closedobs/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

namespace closedobs {

using json = nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string &line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

std::optional<double> parse_real(const std::string &s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char *first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<long long> parse_int(const std::string &s) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

[[noreturn]] void malformed(const std::string &path, std::size_t line, const std::string &what) {
    throw Error(ErrorCode::malformed_input,
                path + ":" + std::to_string(line) + ": " + what);
}

struct Header {
    std::optional<double> dt;
    std::optional<std::size_t> n0, m;
    std::map<std::string, std::string> meta;
};

void apply_meta_json(const json &j, Header &h) {
    if (j.contains("dt")) h.dt = j.at("dt").get<double>();
    if (j.contains("n0")) h.n0 = j.at("n0").get<std::size_t>();
    if (j.contains("m")) h.m = j.at("m").get<std::size_t>();
    if (j.contains("meta") && j.at("meta").is_object()) {
        for (const auto &[k, v] : j.at("meta").items())
            h.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
}

void apply_comment(const std::string &path, std::size_t line_no, const std::string &body,
                   Header &h) {
    const auto eq = body.find('=');
    if (eq == std::string::npos) return; // free-text comment
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key == "dt") {
        auto v = parse_real(value);
        if (!v) malformed(path, line_no, "bad dt value '" + value + "'");
        h.dt = *v;
    } else if (key == "n0" || key == "m") {
        auto v = parse_int(value);
        if (!v || *v < 0) malformed(path, line_no, "bad " + key + " value '" + value + "'");
        (key == "n0" ? h.n0 : h.m) = static_cast<std::size_t>(*v);
    } else if (key.rfind("meta.", 0) == 0) {
        h.meta[key.substr(5)] = value;
    }
}

struct Row {
    long long k;
    std::optional<double> t, dt;
    RealVector input, obs;
    std::size_t line;
};

TrajectoryBundle load_csv(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_failure, "cannot open " + path);

    Header header;
    const std::string sidecar = path + ".meta.json";
    if (std::filesystem::exists(sidecar)) {
        std::ifstream s(sidecar);
        try {
            apply_meta_json(json::parse(s), header);
        } catch (const json::exception &e) {
            throw Error(ErrorCode::malformed_input, sidecar + ": " + e.what());
        }
    }

    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> columns;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            apply_comment(path, line_no, t.substr(1), header);
            continue;
        }
        columns = split_csv(t);
        break;
    }
    if (columns.empty()) throw Error(ErrorCode::malformed_input, path + ": empty file");
    if (columns.size() < 3 || columns[0] != "traj_id" || columns[1] != "k")
        malformed(path, line_no, "header must start with traj_id,k");

    int t_col = -1, dt_col = -1;
    std::vector<int> in_cols, obs_cols;
    for (std::size_t c = 2; c < columns.size(); ++c) {
        const auto &name = columns[c];
        if (name == "t") t_col = static_cast<int>(c);
        else if (name == "dt") dt_col = static_cast<int>(c);
        else if (name.rfind("input_", 0) == 0) in_cols.push_back(static_cast<int>(c));
        else if (name.rfind("obs_", 0) == 0) obs_cols.push_back(static_cast<int>(c));
        else malformed(path, line_no, "unknown column '" + name + "'");
    }
    if (in_cols.empty() || obs_cols.empty())
        malformed(path, line_no, "header needs input_* and obs_* columns");
    if (header.n0 && *header.n0 != in_cols.size())
        throw Error(ErrorCode::inconsistent_data,
                    path + ": n0=" + std::to_string(*header.n0) + " but header has " +
                        std::to_string(in_cols.size()) + " input columns");
    if (header.m && *header.m != obs_cols.size())
        throw Error(ErrorCode::inconsistent_data,
                    path + ": m=" + std::to_string(*header.m) + " but header has " +
                        std::to_string(obs_cols.size()) + " obs columns");

    std::map<long long, std::vector<Row>> groups;
    std::vector<long long> order;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto fields = split_csv(t);
        if (fields.size() != columns.size())
            malformed(path, line_no,
                      "expected " + std::to_string(columns.size()) + " fields, got " +
                          std::to_string(fields.size()));
        auto id = parse_int(fields[0]);
        auto k = parse_int(fields[1]);
        if (!id || !k || *k < 0) malformed(path, line_no, "bad traj_id or k");
        Row row{*k, std::nullopt, std::nullopt, {}, {}, line_no};
        auto get = [&](int c) {
            auto v = parse_real(fields[static_cast<std::size_t>(c)]);
            if (!v || !std::isfinite(*v))
                malformed(path, line_no,
                          "bad value in column " + columns[static_cast<std::size_t>(c)]);
            return *v;
        };
        if (t_col >= 0) row.t = get(t_col);
        if (dt_col >= 0) row.dt = get(dt_col);
        for (int c : in_cols) row.input.push_back(get(c));
        for (int c : obs_cols) row.obs.push_back(get(c));
        if (!groups.count(*id)) order.push_back(*id);
        groups[*id].push_back(std::move(row));
    }
    if (groups.empty()) throw Error(ErrorCode::malformed_input, path + ": no data rows");

    TrajectoryBundle b;
    b.n0 = in_cols.size();
    b.m = obs_cols.size();
    b.meta = header.meta;
    std::optional<double> dt = header.dt;
    std::optional<long long> dt_source;

    for (long long id : order) {
        auto &rows = groups[id];
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Row &a, const Row &b) { return a.k < b.k; });
        const std::string who = "trajectory " + std::to_string(id);
        Trajectory tr;
        tr.input = rows.front().input;
        std::optional<double> traj_dt;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const Row &r = rows[i];
            if (r.k != static_cast<long long>(i))
                throw Error(ErrorCode::inconsistent_data,
                            path + ":" + std::to_string(r.line) + ": " + who +
                                " has missing or duplicate time index k=" + std::to_string(r.k));
            if (r.input != tr.input)
                throw Error(ErrorCode::inconsistent_data,
                            path + ":" + std::to_string(r.line) + ": " + who +
                                " changes its input mid-series");
            if (r.dt) {
                if (traj_dt && std::abs(*traj_dt - *r.dt) > 1e-9 * *traj_dt)
                    throw Error(ErrorCode::inconsistent_data, "inconsistent dt within " + who);
                traj_dt = *r.dt;
            }
            tr.observations.push_back(r.obs);
        }
        if (t_col >= 0 && rows.size() >= 2) {
            const double step = *rows[1].t - *rows[0].t;
            if (traj_dt && std::abs(step - *traj_dt) > 1e-9 * *traj_dt)
                throw Error(ErrorCode::inconsistent_data, "inconsistent dt within " + who);
            traj_dt = step;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const double expect = *rows[0].t + static_cast<double>(i) * step;
                if (std::abs(*rows[i].t - expect) > 1e-9 * std::abs(step) + 1e-12)
                    throw Error(ErrorCode::inconsistent_data,
                                path + ":" + std::to_string(rows[i].line) +
                                    ": nonuniform time spacing in " + who);
            }
        }
        if (traj_dt) {
            if (dt && std::abs(*dt - *traj_dt) > 1e-9 * *dt)
                throw Error(ErrorCode::inconsistent_data,
                            "inconsistent dt: " + who + " has dt=" + format_real(*traj_dt) +
                                (dt_source ? " but trajectory " + std::to_string(*dt_source)
                                           : std::string(" but header")) +
                                " has dt=" + format_real(*dt));
            if (!dt) {
                dt = traj_dt;
                dt_source = id;
            }
        }
        b.trajectories.push_back(std::move(tr));
    }
    if (!dt)
        throw Error(ErrorCode::malformed_input,
                    path + ": dt missing (use '# dt=...', a sidecar, or a t column)");
    b.dt = *dt;
    b.validate();
    return b;
}

TrajectoryBundle load_json(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_failure, "cannot open " + path);
    if (in.peek() == std::ifstream::traits_type::eof())
        throw Error(ErrorCode::malformed_input, path + ": empty file");
    TrajectoryBundle b;
    try {
        const json j = json::parse(in);
        Header h;
        apply_meta_json(j, h);
        if (!h.dt) throw Error(ErrorCode::malformed_input, path + ": missing dt");
        b.dt = *h.dt;
        b.meta = h.meta;
        const auto &trs = j.at("trajectories");
        for (std::size_t i = 0; i < trs.size(); ++i) {
            Trajectory t;
            t.input = trs[i].at("input").get<RealVector>();
            t.observations = trs[i].at("observations").get<std::vector<RealVector>>();
            b.trajectories.push_back(std::move(t));
        }
        b.n0 = h.n0.value_or(b.trajectories.empty() ? 0 : b.trajectories[0].input.size());
        b.m = h.m.value_or(b.trajectories.empty() || b.trajectories[0].observations.empty()
                               ? 0
                               : b.trajectories[0].observations[0].size());
    } catch (const json::exception &e) {
        throw Error(ErrorCode::malformed_input, path + ": " + e.what());
    }
    b.validate();
    return b;
}

std::ofstream open_out(const std::string &path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path);
    return out;
}

void save_csv(const TrajectoryBundle &b, const std::string &path) {
    auto out = open_out(path);
    out << "# dt=" << format_real(b.dt) << "\n# n0=" << b.n0 << "\n# m=" << b.m << '\n';
    for (const auto &[k, v] : b.meta) {
        std::string flat = v;
        std::replace(flat.begin(), flat.end(), '\n', ' ');
        out << "# meta." << k << '=' << flat << '\n';
    }
    out << "traj_id,k";
    for (std::size_t i = 0; i < b.n0; ++i) out << ",input_" << i;
    for (std::size_t i = 0; i < b.m; ++i) out << ",obs_" << i;
    out << '\n';
    std::string input_part;
    for (std::size_t id = 0; id < b.trajectories.size(); ++id) {
        const auto &tr = b.trajectories[id];
        input_part.clear();
        for (double v : tr.input) (input_part += ',') += format_real(v);
        for (std::size_t k = 0; k < tr.observations.size(); ++k) {
            out << id << ',' << k << input_part;
            for (double v : tr.observations[k]) out << ',' << format_real(v);
            out << '\n';
        }
    }
    if (!out) throw Error(ErrorCode::io_failure, "write failed: " + path);
}

void save_json(const TrajectoryBundle &b, const std::string &path) {
    json j;
    j["dt"] = b.dt;
    j["n0"] = b.n0;
    j["m"] = b.m;
    j["meta"] = b.meta;
    j["trajectories"] = json::array();
    for (const auto &tr : b.trajectories)
        j["trajectories"].push_back({{"input", tr.input}, {"observations", tr.observations}});
    auto out = open_out(path);
    out << j.dump() << '\n';
    if (!out) throw Error(ErrorCode::io_failure, "write failed: " + path);
}

} // namespace

std::string format_real(double value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

void TrajectoryBundle::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw Error(ErrorCode::invalid_argument, "dt must be positive and finite");
    if (trajectories.empty())
        throw Error(ErrorCode::inconsistent_data, "bundle has no trajectories");
    if (n0 < 1 || m < 1)
        throw Error(ErrorCode::inconsistent_data, "bundle dimensions n0 and m must be >= 1");
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const auto &t = trajectories[i];
        const std::string who = "trajectory " + std::to_string(i);
        if (t.input.size() != n0)
            throw Error(ErrorCode::inconsistent_data,
                        who + ": input has " + std::to_string(t.input.size()) +
                            " entries, expected n0=" + std::to_string(n0));
        if (t.observations.size() < 2)
            throw Error(ErrorCode::inconsistent_data, who + ": needs at least 2 observations");
        for (double v : t.input)
            if (!std::isfinite(v)) throw Error(ErrorCode::inconsistent_data, who + ": non-finite input");
        for (const auto &y : t.observations) {
            if (y.size() != m)
                throw Error(ErrorCode::inconsistent_data,
                            "inconsistent m: " + who + " has an observation of length " +
                                std::to_string(y.size()) + ", expected " + std::to_string(m));
            for (double v : y)
                if (!std::isfinite(v))
                    throw Error(ErrorCode::inconsistent_data, who + ": non-finite observation");
        }
    }
}

BundleFormat format_from_path(const std::string &path) {
    const auto ext = std::filesystem::path(path).extension().string();
    return ext == ".json" ? BundleFormat::json : BundleFormat::csv;
}

TrajectoryBundle load_bundle(const std::string &path, BundleFormat format) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::io_failure, "no such file: " + path);
    return format == BundleFormat::csv ? load_csv(path) : load_json(path);
}

TrajectoryBundle load_bundle(const std::string &path) {
    return load_bundle(path, format_from_path(path));
}

void save_bundle(const TrajectoryBundle &bundle, const std::string &path, BundleFormat format) {
    bundle.validate();
    if (format == BundleFormat::csv) save_csv(bundle, path);
    else save_json(bundle, path);
}

void save_bundle(const TrajectoryBundle &bundle, const std::string &path) {
    save_bundle(bundle, path, format_from_path(path));
}

TrajectoryBundle average_runs(const TrajectoryBundle &bundle, double tolerance) {
    bundle.validate();
    std::vector<std::vector<std::size_t>> groups;
    auto same = [&](const RealVector &a, const RealVector &b) {
        for (std::size_t i = 0; i < a.size(); ++i)
            if (std::abs(a[i] - b[i]) > tolerance) return false;
        return true;
    };
    for (std::size_t i = 0; i < bundle.trajectories.size(); ++i) {
        const auto &in = bundle.trajectories[i].input;
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto &g) {
            return same(bundle.trajectories[g.front()].input, in);
        });
        if (it == groups.end()) groups.push_back({i});
        else it->push_back(i);
    }

    TrajectoryBundle out;
    out.dt = bundle.dt;
    out.n0 = bundle.n0;
    out.m = bundle.m;
    out.meta = bundle.meta;
    for (const auto &g : groups) {
        const auto &first = bundle.trajectories[g.front()];
        const std::size_t L = first.length();
        for (std::size_t idx : g)
            if (bundle.trajectories[idx].length() != L)
                throw Error(ErrorCode::inconsistent_data,
                            "average_runs: trajectories " + std::to_string(g.front()) + " and " +
                                std::to_string(idx) + " share an input but differ in length");
        Trajectory avg;
        avg.input = first.input;
        avg.observations.assign(L, RealVector(bundle.m, 0.0));
        // Sum in a canonical (sorted) order so the mean does not depend on the
        // order runs were listed in.
        std::vector<double> vals(g.size());
        for (std::size_t k = 0; k < L; ++k)
            for (std::size_t c = 0; c < bundle.m; ++c) {
                for (std::size_t r = 0; r < g.size(); ++r)
                    vals[r] = bundle.trajectories[g[r]].observations[k][c];
                std::sort(vals.begin(), vals.end());
                double s = 0.0;
                for (double v : vals) s += v;
                avg.observations[k][c] = s / static_cast<double>(g.size());
            }
        out.trajectories.push_back(std::move(avg));
    }
    return out;
}

namespace {
struct Fnv1a {
    std::uint64_t h = 1469598103934665603ull;
    void bytes(const void *p, std::size_t n) {
        const auto *c = static_cast<const unsigned char *>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= c[i];
            h *= 1099511628211ull;
        }
    }
    void real(double v) {
        if (v == 0.0) v = 0.0; // fold -0.0
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        bytes(&bits, sizeof bits);
    }
    void count(std::uint64_t v) { bytes(&v, sizeof v); }
};
} // namespace

std::uint64_t bundle_hash(const TrajectoryBundle &bundle) {
    Fnv1a f;
    f.real(bundle.dt);
    f.count(bundle.n0);
    f.count(bundle.m);
    f.count(bundle.trajectories.size());
    for (const auto &t : bundle.trajectories) {
        for (double v : t.input) f.real(v);
        f.count(t.observations.size());
        for (const auto &y : t.observations)
            for (double v : y) f.real(v);
    }
    return f.h;
}

} // namespace closedobs
