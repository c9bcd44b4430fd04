#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "evorace/agent.hpp"
#include "evorace/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "genome and checkpoint files are little-endian");

namespace evorace::agent {

namespace {

constexpr std::uint32_t kGenomeMagic = 0x31475645;  // "EVG1"
constexpr std::uint32_t kGenomeVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

template <typename T>
void write_pod(std::FILE* f, const T& v) {
  if (std::fwrite(&v, sizeof(T), 1, f) != 1) throw IoError("short write");
}

template <typename T>
T read_pod(std::FILE* f) {
  T v;
  if (std::fread(&v, sizeof(T), 1, f) != 1) throw IoError("short read");
  return v;
}

}  // namespace

void save_genome(const std::string& path, const Genome& genome) {
  if (genome.params.size() != genome_param_count())
    throw ConfigError("genome length mismatch");
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open genome file for writing: " + path);
  write_pod(f.get(), kGenomeMagic);
  write_pod(f.get(), kGenomeVersion);
  write_pod(f.get(), architecture_hash());
  const auto& part = genome_partition();
  write_pod(f.get(), static_cast<std::uint32_t>(3));
  write_pod(f.get(), static_cast<std::uint64_t>(part.vision.length));
  write_pod(f.get(), static_cast<std::uint64_t>(part.memory.length));
  write_pod(f.get(), static_cast<std::uint64_t>(part.controller.length));
  if (std::fwrite(genome.params.data(), sizeof(float), genome.params.size(),
                  f.get()) != genome.params.size())
    throw IoError("short write of genome parameters");
}

Genome load_genome(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open genome file: " + path);
  if (read_pod<std::uint32_t>(f.get()) != kGenomeMagic)
    throw IoError("not a genome file: " + path);
  const auto version = read_pod<std::uint32_t>(f.get());
  if (version != kGenomeVersion)
    throw IoError("genome file version " + std::to_string(version) +
                  " unsupported (expected " + std::to_string(kGenomeVersion) +
                  ")");
  const auto hash = read_pod<std::uint64_t>(f.get());
  if (hash != architecture_hash())
    throw IoError("genome architecture hash mismatch: file was written for a "
                  "different network");
  if (read_pod<std::uint32_t>(f.get()) != 3)
    throw IoError("genome slice table malformed");
  const auto& part = genome_partition();
  const std::uint64_t lens[3] = {part.vision.length, part.memory.length,
                                 part.controller.length};
  for (const std::uint64_t expect : lens)
    if (read_pod<std::uint64_t>(f.get()) != expect)
      throw IoError("genome slice lengths do not match the architecture");
  Genome g;
  if (std::fread(g.params.data(), sizeof(float), g.params.size(), f.get()) !=
      g.params.size())
    throw IoError("genome file truncated");
  return g;
}

}  // namespace evorace::agent
