#include "debinforge/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>

namespace debinforge::process {

namespace {

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }
    void reset()
    {
        if (fd >= 0)
            ::close(fd);
        fd = -1;
    }
};

bool make_pipe(Fd& read_end, Fd& write_end)
{
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0)
        return false;
    read_end.fd = fds[0];
    write_end.fd = fds[1];
    return true;
}

} // namespace

std::optional<std::filesystem::path> find_executable(std::string_view name)
{
    if (name.empty())
        return std::nullopt;
    if (name.find('/') != std::string_view::npos) {
        std::filesystem::path p(name);
        if (::access(p.c_str(), X_OK) == 0 && !std::filesystem::is_directory(p))
            return p;
        return std::nullopt;
    }
    const char* path_env = std::getenv("PATH");
    std::string_view paths = path_env ? path_env : "/usr/local/bin:/usr/bin:/bin";
    while (!paths.empty()) {
        auto colon = paths.find(':');
        std::string_view dir = paths.substr(0, colon);
        paths = colon == std::string_view::npos ? std::string_view{} : paths.substr(colon + 1);
        if (dir.empty())
            continue;
        std::filesystem::path candidate = std::filesystem::path(dir) / name;
        std::error_code ec;
        if (::access(candidate.c_str(), X_OK) == 0 && !std::filesystem::is_directory(candidate, ec))
            return candidate;
    }
    return std::nullopt;
}

std::string command_line(const std::vector<std::string>& argv)
{
    std::string out;
    for (const auto& arg : argv) {
        if (!out.empty())
            out += ' ';
        const bool plain = !arg.empty() && arg.find_first_of(" \t\n'\"\\$`*?") == std::string::npos;
        if (plain) {
            out += arg;
        } else {
            out += '\'';
            for (char c : arg) {
                if (c == '\'')
                    out += "'\\''";
                else
                    out += c;
            }
            out += '\'';
        }
    }
    return out;
}

Result run(const std::vector<std::string>& argv, const Options& options)
{
    Result result;
    if (argv.empty()) {
        result.spawn_failed = true;
        result.output = "empty command";
        return result;
    }
    auto exe = find_executable(argv[0]);
    if (!exe) {
        result.spawn_failed = true;
        result.output = "executable not found: " + argv[0];
        return result;
    }

    Fd out_read, out_write, in_read, in_write, err_read, err_write;
    if (!make_pipe(out_read, out_write) || !make_pipe(in_read, in_write) || !make_pipe(err_read, err_write)) {
        result.spawn_failed = true;
        result.output = std::string("pipe: ") + std::strerror(errno);
        return result;
    }

    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const auto& a : argv)
        args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    const std::string exe_path = exe->string();
    const std::string cwd = options.working_directory.string();

    const pid_t pid = ::fork();
    if (pid < 0) {
        result.spawn_failed = true;
        result.output = std::string("fork: ") + std::strerror(errno);
        return result;
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(in_read.fd, STDIN_FILENO);
        ::dup2(out_write.fd, STDOUT_FILENO);
        ::dup2(out_write.fd, STDERR_FILENO);
        if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) {
            int e = errno;
            (void)!::write(err_write.fd, &e, sizeof e);
            ::_exit(127);
        }
        ::execv(exe_path.c_str(), args.data());
        int e = errno;
        (void)!::write(err_write.fd, &e, sizeof e);
        ::_exit(127);
    }

    in_read.reset();
    out_write.reset();
    err_write.reset();

    if (options.stdin_data) {
        const std::string& data = *options.stdin_data;
        std::size_t written = 0;
        ::signal(SIGPIPE, SIG_IGN);
        while (written < data.size()) {
            ssize_t n = ::write(in_write.fd, data.data() + written, data.size() - written);
            if (n <= 0)
                break;
            written += static_cast<std::size_t>(n);
        }
    }
    in_write.reset();

    const auto deadline = std::chrono::steady_clock::now() + options.timeout;
    char buffer[4096];
    while (true) {
        const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) {
            result.timed_out = true;
            ::kill(-pid, SIGKILL);
            break;
        }
        pollfd pfd{out_read.fd, POLLIN, 0};
        int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining.count(), 1000)));
        if (ready < 0 && errno == EINTR)
            continue;
        if (ready <= 0)
            continue;
        ssize_t n = ::read(out_read.fd, buffer, sizeof buffer);
        if (n > 0) {
            result.output.append(buffer, static_cast<std::size_t>(n));
        } else if (n == 0 || errno != EINTR) {
            break;
        }
    }

    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    int exec_errno = 0;
    if (::read(err_read.fd, &exec_errno, sizeof exec_errno) == static_cast<ssize_t>(sizeof exec_errno)) {
        result.spawn_failed = true;
        result.output += std::string("exec failed: ") + std::strerror(exec_errno);
    }
    if (WIFEXITED(status))
        result.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
        result.exit_code = 128 + WTERMSIG(status);
    return result;
}

} // namespace debinforge::process
