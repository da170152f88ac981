#include "config.hpp"

#include <cstdlib>
#include <filesystem>

namespace flashlab::cli {

void ExperimentConfig::validate() const {
  auto positive = [](std::size_t v, const char* field) {
    if (v == 0) throw ConfigError(std::string(field) + " must be positive");
  };
  positive(seqlen, "seqlen");
  positive(headdim, "headdim");
  positive(heads, "heads");
  positive(batch, "batch");
  positive(block_rows, "block-rows");
  positive(block_cols, "block-cols");
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (format != "fp16" && format != "fp8")
    throw ConfigError("format must be fp16 or fp8, got '" + format + "'");
  if (quant != "per-block" && quant != "per-tensor")
    throw ConfigError("quant must be per-block or per-tensor, got '" + quant + "'");
}

FloatFormatId parse_format(const std::string& name) {
  if (name == "fp16") return FloatFormatId::fp16;
  if (name == "fp8") return FloatFormatId::fp8e4m3;
  throw ConfigError("format must be fp16 or fp8, got '" + name + "'");
}

ScheduleKind parse_schedule(const std::string& name, bool fp8) {
  ScheduleKind kind;
  if (name == "serial")
    kind = ScheduleKind::serial();
  else if (name == "warpspec")
    kind = ScheduleKind::warpspec();
  else if (name == "warpspec+pingpong")
    kind = ScheduleKind::warpspec_pingpong();
  else if (name == "pingpong+2stage")
    kind = ScheduleKind::pingpong_2stage();
  else if (name == "pingpong+3stage")
    kind = ScheduleKind::pingpong_3stage();
  else if (name == "overlap-only")
    kind = ScheduleKind::overlap_only();
  else
    throw ConfigError(
        "schedule must be one of serial, warpspec, warpspec+pingpong, "
        "pingpong+2stage, pingpong+3stage, overlap-only; got '" +
        name + "'");
  kind.fp8 = fp8;
  return kind;
}

std::string resolve_output_path(const std::string& name) {
  namespace fs = std::filesystem;
  fs::path p(name);
  if (p.is_relative()) {
    if (const char* dir = std::getenv("FLASHLAB_OUT_DIR"); dir && *dir)
      p = fs::path(dir) / p;
  }
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec)
      throw ConfigError("cannot create output directory " +
                        p.parent_path().string() + ": " + ec.message());
  }
  return p.string();
}

}  // namespace flashlab::cli
