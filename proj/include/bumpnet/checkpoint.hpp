#pragma once

// Model checkpoints as small JSON documents. Doubles are written with 17
// significant digits, which round-trips every finite value exactly.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bumpnet/deeponet.hpp"
#include "bumpnet/error.hpp"
#include "bumpnet/model.hpp"

namespace bumpnet {

inline constexpr const char* kCheckpointFormat = "bumpnet.checkpoint.v1";

namespace detail {

inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string number_array(std::span<const double> v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += i % 8 ? ", " : ",\n    ";
    s += fmt17(v[i]);
  }
  return s + "]";
}

inline std::string model_fields(const BumpNetModel& m, const std::string& indent) {
  std::ostringstream o;
  o << indent << "\"index_map\": \"" << RawLayout::kVersion << "\",\n";
  o << indent << "\"dim\": " << m.dim() << ",\n";
  o << indent << "\"bbox\": {\"lower\": " << number_array(m.bbox().lower)
    << ", \"upper\": " << number_array(m.bbox().upper) << "},\n";
  o << indent << "\"bumps\": " << m.bump_count() << ",\n";
  o << indent << "\"include_heights\": " << (m.include_heights() ? "true" : "false") << ",\n";
  o << indent << "\"raw\": " << number_array(m.raw());
  return o.str();
}

inline nlohmann::json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint " + path + " is not valid JSON: " + e.what());
  }
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write checkpoint " + path);
  out << text;
  if (!out) throw ValidationError("failed writing checkpoint " + path);
}

inline BumpNetModel model_from_json(const nlohmann::json& j, const std::string& where) {
  try {
    if (j.at("index_map").get<std::string>() != RawLayout::kVersion)
      throw ValidationError(where + ": unsupported parameter index map '" + j.at("index_map").get<std::string>() + "'");
    const auto dim = j.at("dim").get<std::size_t>();
    BoundingBox box(j.at("bbox").at("lower").get<std::vector<double>>(),
                    j.at("bbox").at("upper").get<std::vector<double>>());
    require(box.dim() == dim, where + ": bbox dimension does not match dim");
    return BumpNetModel(box, j.at("bumps").get<std::size_t>(), j.at("include_heights").get<bool>(),
                        j.at("raw").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

inline void check_header(const nlohmann::json& j, const std::string& kind, const std::string& path) {
  if (!j.is_object() || j.value("format", "") != kCheckpointFormat)
    throw ValidationError(path + " is not a " + std::string(kCheckpointFormat) + " checkpoint");
  const std::string k = j.value("kind", "");
  if (k != kind) throw ValidationError(path + " holds a '" + k + "' model, expected '" + kind + "'");
}

}  // namespace detail

inline std::string checkpoint_text(const BumpNetModel& m) {
  return std::string("{\n  \"format\": \"") + kCheckpointFormat + "\",\n  \"kind\": \"bumpnet\",\n" +
         detail::model_fields(m, "  ") + "\n}\n";
}

inline void save_checkpoint(const BumpNetModel& m, const std::string& path) {
  detail::write_file(path, checkpoint_text(m));
}

inline BumpNetModel load_checkpoint(const std::string& path) {
  const auto j = detail::parse_file(path);
  detail::check_header(j, "bumpnet", path);
  return detail::model_from_json(j, path);
}

/// "bumpnet" or "deeponet"; throws when the file is not a checkpoint.
inline std::string checkpoint_kind(const std::string& path) {
  const auto j = detail::parse_file(path);
  if (!j.is_object() || j.value("format", "") != kCheckpointFormat)
    throw ValidationError(path + " is not a " + std::string(kCheckpointFormat) + " checkpoint");
  return j.value("kind", "");
}

inline std::string checkpoint_text(const DeepOnetModel& m) {
  std::string widths;
  for (std::size_t i = 0; i < m.branch.widths().size(); ++i)
    widths += (i ? ", " : "") + std::to_string(m.branch.widths()[i]);
  return std::string("{\n  \"format\": \"") + kCheckpointFormat + "\",\n  \"kind\": \"deeponet\",\n" +
         "  \"bias\": " + detail::fmt17(m.bias) + ",\n  \"branch\": {\n    \"widths\": [" + widths +
         "],\n    \"params\": " + detail::number_array(m.branch.params()) + "\n  },\n  \"trunk\": {\n" +
         detail::model_fields(m.trunk, "    ") + "\n  }\n}\n";
}

inline void save_checkpoint(const DeepOnetModel& m, const std::string& path) {
  detail::write_file(path, checkpoint_text(m));
}

inline DeepOnetModel load_deeponet_checkpoint(const std::string& path) {
  const auto j = detail::parse_file(path);
  detail::check_header(j, "deeponet", path);
  try {
    DeepOnetModel m{Mlp(j.at("branch").at("widths").get<std::vector<std::size_t>>(),
                        j.at("branch").at("params").get<std::vector<double>>()),
                    detail::model_from_json(j.at("trunk"), path + " (trunk)"), j.at("bias").get<double>()};
    require(m.branch.output_size() == m.trunk.bump_count(), path + ": branch width does not match trunk");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace bumpnet
