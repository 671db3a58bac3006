#include "zzd/checkpoint.hpp"

#include <fstream>

#include "zzd/binary_io.hpp"

namespace zzd {

namespace {

using io::read_le;
using io::write_le;

void write_config(std::ostream& out, const NetConfig& c) {
  write_le<std::uint8_t>(out, static_cast<std::uint8_t>(c.arch));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.embed_dim));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.fc_dim));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.image.channels));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.image.height));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.image.width));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.stem_channels));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.block_channels.size()));
  for (int w : c.block_channels) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.downsample_blocks.size()));
  for (int d : c.downsample_blocks) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  write_le<double>(out, c.dropout_rate);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.num_classes));
  write_le<std::uint8_t>(out, c.normalize_input ? 1 : 0);
}

std::vector<int> read_int_list(std::istream& in, const char* what) {
  const auto n = read_le<std::uint32_t>(in, what);
  if (n > 4096) throw FormatError(FormatError::Kind::corrupt, std::string("implausible length for ") + what);
  std::vector<int> values(n);
  for (auto& v : values) v = static_cast<int>(read_le<std::uint32_t>(in, what));
  return values;
}

NetConfig read_config(std::istream& in) {
  NetConfig c;
  const auto arch = read_le<std::uint8_t>(in, "architecture");
  if (arch > 1) throw FormatError(FormatError::Kind::corrupt, "unknown architecture tag " + std::to_string(arch));
  c.arch = static_cast<Architecture>(arch);
  c.embed_dim = static_cast<int>(read_le<std::uint32_t>(in, "embed_dim"));
  c.fc_dim = static_cast<int>(read_le<std::uint32_t>(in, "fc_dim"));
  c.image.channels = static_cast<int>(read_le<std::uint32_t>(in, "image channels"));
  c.image.height = static_cast<int>(read_le<std::uint32_t>(in, "image height"));
  c.image.width = static_cast<int>(read_le<std::uint32_t>(in, "image width"));
  c.stem_channels = static_cast<int>(read_le<std::uint32_t>(in, "stem_channels"));
  c.block_channels = read_int_list(in, "block_channels");
  c.downsample_blocks = read_int_list(in, "downsample_blocks");
  c.dropout_rate = read_le<double>(in, "dropout_rate");
  c.num_classes = static_cast<int>(read_le<std::uint32_t>(in, "num_classes"));
  c.normalize_input = read_le<std::uint8_t>(in, "normalize_input") != 0;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(FormatError::Kind::corrupt, std::string("invalid embedded config: ") + e.what());
  }
  return c;
}

}  // namespace

void save_checkpoint(const Parameters<float>& params, const std::filesystem::path& path,
                     const std::optional<SchedulerState>& scheduler) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::io, "cannot write checkpoint '" + tmp.string() + "'");
    out.write(kCheckpointMagic, 4);
    write_le<std::uint16_t>(out, kCheckpointVersion);
    write_config(out, params.config);
    write_le<std::uint8_t>(out, scheduler ? 1 : 0);
    if (scheduler) {
      write_le<double>(out, scheduler->lr);
      write_le<double>(out, scheduler->best_lr);
      write_le<double>(out, scheduler->prev_metric);
      write_le<std::int64_t>(out, scheduler->num_good_epochs);
      write_le<std::int64_t>(out, scheduler->num_bad_epochs);
      write_le<std::int64_t>(out, scheduler->num_epochs);
    }
    std::uint32_t count = 0;
    auto counter = [&](const std::string&, const Mat<float>&) { ++count; };
    for_each_parameter(params, counter);
    for_each_buffer(params, counter);
    write_le<std::uint32_t>(out, count);
    auto writer = [&](const std::string& name, const Mat<float>& m) {
      write_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_le<std::uint8_t>(out, 2);
      write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
      write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
      for (Eigen::Index k = 0; k < m.size(); ++k) write_le<float>(out, m.data()[k]);
    };
    for_each_parameter(params, writer);
    for_each_buffer(params, writer);
    if (!out) throw FormatError(FormatError::Kind::io, "failed writing checkpoint '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open checkpoint '" + path.string() + "'");
  try {
    if (io::read_bytes(in, 4, "magic") != std::string_view(kCheckpointMagic, 4)) {
      throw FormatError(FormatError::Kind::bad_magic, "bad magic (expected ZZCK)");
    }
    const auto version = read_le<std::uint16_t>(in, "version");
    if (version != kCheckpointVersion) {
      throw FormatError(FormatError::Kind::unsupported_version,
                        "unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck{allocate<float>(read_config(in)), std::nullopt};
    if (read_le<std::uint8_t>(in, "scheduler flag") != 0) {
      SchedulerState s;
      s.lr = read_le<double>(in, "scheduler lr");
      s.best_lr = read_le<double>(in, "scheduler best_lr");
      s.prev_metric = read_le<double>(in, "scheduler prev_metric");
      s.num_good_epochs = read_le<std::int64_t>(in, "scheduler good epochs");
      s.num_bad_epochs = read_le<std::int64_t>(in, "scheduler bad epochs");
      s.num_epochs = read_le<std::int64_t>(in, "scheduler epochs");
      ck.scheduler = s;
    }

    std::vector<std::pair<std::string, Mat<float>*>> expected;
    auto collect = [&](const std::string& name, Mat<float>& m) { expected.emplace_back(name, &m); };
    for_each_parameter(ck.params, collect);
    for_each_buffer(ck.params, collect);

    const auto count = read_le<std::uint32_t>(in, "tensor count");
    if (count != expected.size()) {
      throw FormatError(FormatError::Kind::shape_mismatch, "checkpoint holds " + std::to_string(count) +
                                                               " tensors, config implies " +
                                                               std::to_string(expected.size()));
    }
    for (auto& [name, target] : expected) {
      const auto len = read_le<std::uint16_t>(in, "tensor name length");
      const auto stored = io::read_bytes(in, len, "tensor name");
      if (stored != name) {
        throw FormatError(FormatError::Kind::corrupt, "expected tensor '" + name + "', found '" + stored + "'");
      }
      if (read_le<std::uint8_t>(in, "tensor rank") != 2) {
        throw FormatError(FormatError::Kind::corrupt, "tensor '" + name + "' has unsupported rank");
      }
      const auto rows = read_le<std::uint64_t>(in, "tensor rows");
      const auto cols = read_le<std::uint64_t>(in, "tensor cols");
      if (rows != static_cast<std::uint64_t>(target->rows()) || cols != static_cast<std::uint64_t>(target->cols())) {
        throw FormatError(FormatError::Kind::shape_mismatch,
                          "tensor '" + name + "' is " + std::to_string(rows) + "x" + std::to_string(cols) +
                              ", config implies " + std::to_string(target->rows()) + "x" +
                              std::to_string(target->cols()));
      }
      for (Eigen::Index k = 0; k < target->size(); ++k) target->data()[k] = read_le<float>(in, name.c_str());
    }
    return ck;
  } catch (const FormatError& e) {
    throw FormatError(e.kind(), path.string() + ": " + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const NetConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  if (!(ck.params.config == expected)) {
    throw FormatError(FormatError::Kind::config_mismatch,
                      path.string() + ": checkpoint holds a " + std::string(to_string(ck.params.config.arch)) +
                          " model whose config differs from the expected " + std::string(to_string(expected.arch)) +
                          " config");
  }
  return ck;
}

}  // namespace zzd
