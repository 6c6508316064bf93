#pragma once

#include <filesystem>
#include <functional>
#include <string_view>

namespace flowcast::io {

// Calls `produce` with a temporary path next to `target`, then renames it
// over `target`. If `produce` throws, the temporary is removed and `target`
// is left untouched.
void atomic_write(const std::filesystem::path& target,
                  const std::function<void(const std::filesystem::path&)>& produce);

void atomic_write_text(const std::filesystem::path& target, std::string_view content);

std::string read_text(const std::filesystem::path& path);

}  // namespace flowcast::io
