#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace defdts {

// SHA-256, used for prompt hashes and completion-cache keys. Content
// addressed caching needs a real digest, not std::hash.
std::string sha256_hex(std::string_view data);

}  // namespace defdts
