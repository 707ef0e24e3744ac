#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace scratch {

/// Fresh empty directory `<root>/<name>`.
std::filesystem::path fresh_dir(const std::filesystem::path& root, const std::string& name);

/// Unique directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& tag);

/// relative path -> sha256 of contents, for every regular file under `dir`.
std::map<std::string, std::string> digest_tree(const std::filesystem::path& dir);

void write_text(const std::filesystem::path& path, const std::string& text);

/// Runs a shell command with stdout/stderr discarded; returns the exit status.
int run_quiet(const std::string& command);

}  // namespace scratch
