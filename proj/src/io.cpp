#include "certkit/io.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace certkit {

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
            row.push_back(m(i, k));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const Json& j, std::string_view what) {
    if (!j.is_array()) {
        throw FormatError(std::string(what) + ": expected a nested array");
    }
    std::vector<std::vector<double>> rows;
    try {
        for (const Json& row : j) {
            rows.push_back(row.get<std::vector<double>>());
        }
        return make_matrix(rows);
    } catch (const Json::exception& e) {
        throw FormatError(std::string(what) + ": " + e.what());
    } catch (const DimensionError& e) {
        throw FormatError(std::string(what) + ": " + e.what());
    }
}

Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

Vector vector_from_json(const Json& j, std::string_view what) {
    try {
        return make_vector(j.get<std::vector<double>>());
    } catch (const Json::exception& e) {
        throw FormatError(std::string(what) + ": " + e.what());
    } catch (const DimensionError& e) {
        throw FormatError(std::string(what) + ": " + e.what());
    }
}

Json model_to_json(const StochasticLti& m) {
    Json j;
    j["A"] = matrix_to_json(m.A);
    j["B"] = matrix_to_json(m.B);
    j["C"] = matrix_to_json(m.C);
    j["H"] = matrix_to_json(m.H);
    j["F"] = matrix_to_json(m.F);
    j["E"] = matrix_to_json(m.E);
    j["x0"] = vector_to_json(m.x0);
    j["P0"] = matrix_to_json(m.P0);
    return j;
}

StochasticLti model_from_json(const Json& j) {
    if (!j.is_object()) {
        throw FormatError("model: expected a JSON object");
    }
    for (const char* key : {"A", "B", "C", "H", "x0"}) {
        if (!j.contains(key)) {
            throw FormatError(std::string("model: missing key \"") + key + "\"");
        }
    }
    StochasticLti m;
    m.A = matrix_from_json(j["A"], "A");
    m.B = matrix_from_json(j["B"], "B");
    m.C = matrix_from_json(j["C"], "C");
    m.H = matrix_from_json(j["H"], "H");
    m.x0 = vector_from_json(j["x0"], "x0");
    const auto n = m.A.rows();
    m.F = j.contains("F") ? matrix_from_json(j["F"], "F") : Matrix::Zero(n, 1);
    m.E = j.contains("E") ? matrix_from_json(j["E"], "E") : Matrix::Zero(m.C.rows(), 1);
    m.P0 = j.contains("P0") ? matrix_from_json(j["P0"], "P0") : Matrix::Zero(n, n);
    m.validate();
    return m;
}

std::string model_hash(const StochasticLti& m) {
    const std::string text = model_to_json(m).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char ch : text) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

} // namespace

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
        const std::size_t left = bytes.size() - i;
        std::uint32_t v = static_cast<std::uint32_t>(bytes[i]) << 16U;
        if (left > 1) v |= static_cast<std::uint32_t>(bytes[i + 1]) << 8U;
        if (left > 2) v |= bytes[i + 2];
        out += kAlphabet[(v >> 18U) & 63U];
        out += kAlphabet[(v >> 12U) & 63U];
        out += left > 1 ? kAlphabet[(v >> 6U) & 63U] : '=';
        out += left > 2 ? kAlphabet[v & 63U] : '=';
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) {
        throw FormatError("base64: length is not a multiple of 4");
    }
    std::array<int, 256> rev{};
    rev.fill(-1);
    for (std::size_t i = 0; i < kAlphabet.size(); ++i) {
        rev[static_cast<unsigned char>(kAlphabet[i])] = static_cast<int>(i);
    }
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        std::uint32_t v = 0;
        int pad = 0;
        for (std::size_t k = 0; k < 4; ++k) {
            const char ch = text[i + k];
            if (ch == '=' && i + 4 == text.size() && k >= 2) {
                ++pad;
                v <<= 6U;
                continue;
            }
            const int d = rev[static_cast<unsigned char>(ch)];
            if (d < 0 || pad > 0) {
                throw FormatError("base64: invalid character");
            }
            v = (v << 6U) | static_cast<std::uint32_t>(d);
        }
        out.push_back(static_cast<std::uint8_t>(v >> 16U));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8U));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
    }
    return out;
}

std::vector<std::uint8_t> pack_bits(const std::vector<std::uint8_t>& flags) {
    std::vector<std::uint8_t> out((flags.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (flags[i] != 0) {
            out[i / 8] |= static_cast<std::uint8_t>(1U << (i % 8));
        }
    }
    return out;
}

std::vector<std::uint8_t> unpack_bits(const std::vector<std::uint8_t>& bytes, std::size_t count) {
    if (bytes.size() != (count + 7) / 8) {
        throw FormatError("bitmap: wrong byte count for the grid");
    }
    std::vector<std::uint8_t> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = (bytes[i / 8] >> (i % 8)) & 1U;
    }
    return out;
}

Json grid_to_json(const Grid& g) {
    return Json{{"lower", g.lower()}, {"upper", g.upper()}, {"eta", g.eta()}, {"counts", g.counts()}};
}

Grid grid_from_json(const Json& j) {
    try {
        return Grid(j.at("lower").get<std::vector<double>>(), j.at("upper").get<std::vector<double>>(),
                    j.at("eta").get<std::vector<double>>());
    } catch (const Json::exception& e) {
        throw FormatError(std::string("grid: ") + e.what());
    }
}

Json controller_to_json(const SymbolicController& c) {
    Json j;
    j["state_grid"] = grid_to_json(c.state_grid);
    j["input_grid"] = grid_to_json(c.input_grid);
    j["bit_order"] = "row-major cells, least significant bit first";
    j["winning_count"] = c.winning_count();
    j["invariant_count"] = c.invariant_count();
    j["winning"] = base64_encode(pack_bits(c.winning));
    j["invariant"] = base64_encode(pack_bits(c.invariant));
    j["reach_policy"] = c.reach_policy;
    j["stay_policy"] = c.stay_policy;
    j["invariant_sizes"] = c.trace.invariant_sizes;
    j["winning_sizes"] = c.trace.winning_sizes;
    return j;
}

SymbolicController controller_from_json(const Json& j) {
    SymbolicController c;
    try {
        c.state_grid = grid_from_json(j.at("state_grid"));
        c.input_grid = grid_from_json(j.at("input_grid"));
        const std::size_t n = c.state_grid.size();
        c.winning = unpack_bits(base64_decode(j.at("winning").get<std::string>()), n);
        c.invariant = unpack_bits(base64_decode(j.at("invariant").get<std::string>()), n);
        c.reach_policy = j.at("reach_policy").get<std::vector<std::int32_t>>();
        c.stay_policy = j.at("stay_policy").get<std::vector<std::int32_t>>();
        if (j.contains("invariant_sizes")) {
            c.trace.invariant_sizes = j["invariant_sizes"].get<std::vector<std::size_t>>();
            c.trace.winning_sizes = j["winning_sizes"].get<std::vector<std::size_t>>();
        }
    } catch (const Json::exception& e) {
        throw FormatError(std::string("controller: ") + e.what());
    }
    const std::size_t n = c.state_grid.size();
    if (c.reach_policy.size() != n || c.stay_policy.size() != n) {
        throw FormatError("controller: policy tables do not match the state grid");
    }
    const auto n_inputs = static_cast<std::int32_t>(c.input_grid.size());
    for (std::size_t i = 0; i < n; ++i) {
        const bool reach_ok = c.winning[i] != 0 ? (c.reach_policy[i] >= 0 && c.reach_policy[i] < n_inputs)
                                                : c.reach_policy[i] == -1;
        const bool stay_ok = c.invariant[i] != 0 ? (c.stay_policy[i] >= 0 && c.stay_policy[i] < n_inputs)
                                                 : c.stay_policy[i] == -1;
        if (!reach_ok || !stay_ok || (c.invariant[i] != 0 && c.winning[i] == 0)) {
            throw FormatError("controller: policy inconsistent with the winning/invariant sets at cell " +
                              std::to_string(i));
        }
    }
    return c;
}

Json certificate_to_json(const PrecisionCertificate& cert, const StochasticLti& m) {
    Json j;
    j["regime"] = to_string(cert.regime);
    j["interface"] = to_string(cert.interface);
    j["eps_x0"] = cert.eps_x0;
    j["eps_inf"] = cert.eps_inf;
    j["lambda"] = cert.lambda ? Json(*cert.lambda) : Json(nullptr);
    j["horizon_used"] = cert.horizon_used;
    j["Q"] = matrix_to_json(cert.Q);
    j["model_hash"] = model_hash(m);
    j["eps_sup"] = cert.eps_sup;
    j["duality_gap"] = cert.duality_gap;
    return j;
}

Json report_to_json(const SolverReport& r) {
    return Json{{"iterations", r.iterations}, {"residual_norm", r.residual_norm}, {"converged", r.converged}};
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open " + path.string());
    }
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw FormatError("cannot write " + tmp.string());
        }
        out << content;
        out.flush();
        if (!out) {
            std::filesystem::remove(tmp);
            throw FormatError("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

void write_json_atomic(const std::filesystem::path& path, const Json& j) {
    write_file_atomic(path, j.dump(2) + "\n");
}

} // namespace certkit
