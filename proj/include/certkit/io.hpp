#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "certkit/accuracy.hpp"
#include "certkit/matops.hpp"
#include "certkit/model.hpp"
#include "certkit/symbolic.hpp"

namespace certkit {

using Json = nlohmann::ordered_json;

/// Thrown for unreadable files and malformed documents.
class FormatError : public Error {
public:
    using Error::Error;
};

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j, std::string_view what);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j, std::string_view what);

/// Keys "A","B","C","H","F","E","x0","P0"; F, E and P0 default to zeros.
Json model_to_json(const StochasticLti& m);
StochasticLti model_from_json(const Json& j);

/// FNV-1a (64 bit) of the compact model JSON, as 16 hex digits.
std::string model_hash(const StochasticLti& m);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Packs one flag per cell into bits, least significant bit first.
std::vector<std::uint8_t> pack_bits(const std::vector<std::uint8_t>& flags);
std::vector<std::uint8_t> unpack_bits(const std::vector<std::uint8_t>& bytes, std::size_t count);

Json grid_to_json(const Grid& g);
Grid grid_from_json(const Json& j);

Json controller_to_json(const SymbolicController& c);
SymbolicController controller_from_json(const Json& j);

Json certificate_to_json(const PrecisionCertificate& cert, const StochasticLti& m);

Json report_to_json(const SolverReport& r);

Json read_json_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
void write_json_atomic(const std::filesystem::path& path, const Json& j);

} // namespace certkit
