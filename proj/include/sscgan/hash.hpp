#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

namespace sscgan {

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::filesystem::path& path);
// SHA-1 of "blob <size>\0<content>", as `git hash-object` computes it.
std::string git_blob_sha1(std::span<const std::uint8_t> bytes);

}  // namespace sscgan
