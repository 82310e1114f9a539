#include "cda/advisory/log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cda::advisory {

namespace {

[[noreturn]] void fail(const std::string& what) { throw LogError(what + ": " + std::strerror(errno)); }

}  // namespace

AdvisoryLog::AdvisoryLog(std::string path) : path_(std::move(path)) {
    std::string content;
    {
        std::ifstream in(path_, std::ios::binary);
        if (in) {
            std::stringstream ss;
            ss << in.rdbuf();
            content = ss.str();
        }
    }
    std::size_t good_end = 0;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        const auto nl = content.find('\n', pos);
        ++line_no;
        if (nl == std::string::npos) {
            break;  // torn tail: no newline means the write never completed
        }
        const auto line = content.substr(pos, nl - pos);
        if (!line.empty()) {
            try {
                recovered_.push_back(nlohmann::json::parse(line));
            } catch (const nlohmann::json::parse_error&) {
                throw LogError(path_ + ": corrupt entry on line " + std::to_string(line_no));
            }
        }
        pos = nl + 1;
        good_end = pos;
    }
    fd_ = pubsub::Fd(::open(path_.c_str(), O_WRONLY | O_CREAT | O_CLOEXEC, 0644));
    if (!fd_.valid()) {
        fail("cannot open " + path_);
    }
    if (::ftruncate(fd_.get(), static_cast<off_t>(good_end)) != 0) {
        fail("cannot truncate " + path_);
    }
    if (::lseek(fd_.get(), 0, SEEK_END) < 0) {
        fail("cannot seek " + path_);
    }
}

void AdvisoryLog::append(const nlohmann::json& entry) {
    const std::string line = entry.dump() + "\n";
    std::size_t off = 0;
    while (off < line.size()) {
        const ssize_t n = ::write(fd_.get(), line.data() + off, line.size() - off);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            fail("cannot append to " + path_);
        }
        off += static_cast<std::size_t>(n);
    }
    if (::fdatasync(fd_.get()) != 0) {
        fail("cannot sync " + path_);
    }
}

}  // namespace cda::advisory
