#include "evorace/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>

#include "evorace/agent.hpp"
#include "evorace/errors.hpp"

namespace evorace {

namespace {

constexpr std::uint32_t kMagic = 0x4B435645;  // "EVCK"
constexpr std::uint32_t kVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

class HashingWriter {
 public:
  explicit HashingWriter(std::FILE* f) : f_(f) {}

  void bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001B3ull;
    }
    if (std::fwrite(data, 1, len, f_) != len)
      throw IoError("short write to checkpoint");
  }
  template <typename T>
  void pod(const T& v) {
    bytes(&v, sizeof(T));
  }
  std::uint64_t hash() const { return hash_; }

 private:
  std::FILE* f_;
  std::uint64_t hash_ = 0xCBF29CE484222325ull;
};

class HashingReader {
 public:
  explicit HashingReader(std::FILE* f) : f_(f) {}

  void bytes(void* data, std::size_t len) {
    if (std::fread(data, 1, len, f_) != len)
      throw IoError("checkpoint file truncated");
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001B3ull;
    }
  }
  template <typename T>
  T pod() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  std::uint64_t hash() const { return hash_; }

 private:
  std::FILE* f_;
  std::uint64_t hash_ = 0xCBF29CE484222325ull;
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string tmp = path + ".tmp";
  {
    FilePtr f(std::fopen(tmp.c_str(), "wb"));
    if (!f) throw IoError("cannot open checkpoint for writing: " + tmp);
    HashingWriter w(f.get());
    w.pod(kMagic);
    w.pod(kVersion);
    w.pod(agent::architecture_hash());
    w.pod(static_cast<std::uint64_t>(ckpt.config_text.size()));
    w.bytes(ckpt.config_text.data(), ckpt.config_text.size());
    w.pod(static_cast<std::int32_t>(ckpt.generation));
    w.pod(ckpt.lineage_counter);
    w.pod(static_cast<std::uint32_t>(ckpt.population.size()));
    for (const evo::Individual& ind : ckpt.population) {
      w.pod(ind.lineage_id);
      w.pod(ind.eval_seed);
      w.pod(ind.fitness);
      w.pod(static_cast<std::uint8_t>(ind.evaluated ? 1 : 0));
      if (ind.genome.params.size() != agent::genome_param_count())
        throw ConfigError("checkpoint population has a malformed genome");
      w.bytes(ind.genome.params.data(),
              ind.genome.params.size() * sizeof(float));
    }
    w.pod(static_cast<std::int32_t>(ckpt.elite_index));
    w.pod(ckpt.log_offset);
    const std::uint64_t h = w.hash();
    if (std::fwrite(&h, sizeof h, 1, f.get()) != 1)
      throw IoError("short write to checkpoint");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open checkpoint: " + path);
  HashingReader r(f.get());
  if (r.pod<std::uint32_t>() != kMagic)
    throw IoError("not a checkpoint file: " + path);
  const auto version = r.pod<std::uint32_t>();
  if (version != kVersion)
    throw IoError("checkpoint version " + std::to_string(version) +
                  " unsupported (this build reads version " +
                  std::to_string(kVersion) + ")");
  if (r.pod<std::uint64_t>() != agent::architecture_hash())
    throw IoError("checkpoint architecture hash mismatch");
  Checkpoint ckpt;
  const auto config_len = r.pod<std::uint64_t>();
  if (config_len > (1u << 20)) throw IoError("checkpoint config blob too big");
  ckpt.config_text.resize(config_len);
  r.bytes(ckpt.config_text.data(), config_len);
  ckpt.generation = r.pod<std::int32_t>();
  ckpt.lineage_counter = r.pod<std::uint64_t>();
  const auto pop_size = r.pod<std::uint32_t>();
  if (pop_size > (1u << 16)) throw IoError("checkpoint population too big");
  ckpt.population.resize(pop_size);
  for (evo::Individual& ind : ckpt.population) {
    ind.lineage_id = r.pod<std::uint64_t>();
    ind.eval_seed = r.pod<std::uint64_t>();
    ind.fitness = r.pod<double>();
    ind.evaluated = r.pod<std::uint8_t>() != 0;
    r.bytes(ind.genome.params.data(),
            ind.genome.params.size() * sizeof(float));
  }
  ckpt.elite_index = r.pod<std::int32_t>();
  ckpt.log_offset = r.pod<std::uint64_t>();
  const std::uint64_t expect = r.hash();
  std::uint64_t stored = 0;
  if (std::fread(&stored, sizeof stored, 1, f.get()) != 1)
    throw IoError("checkpoint file truncated (missing checksum)");
  if (stored != expect)
    throw IoError("checkpoint checksum failure: file is corrupt");
  return ckpt;
}

}  // namespace evorace
