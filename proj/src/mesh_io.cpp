// toolmesh v1: whitespace-delimited ASCII.
//
//   toolmesh v1
//   n <id> <x> <y>          node, metres
//   e <id> <n1> <n2> <n3>   constant-strain triangle
//   f <id>                  node with both displacements fixed
//
// Ids are 0-based and consecutive per record kind. Blank lines and lines
// starting with '#' are ignored.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "toolife/error.hpp"
#include "toolife/fea.hpp"

namespace toolife::fea {

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
    throw MeshError("toolmesh line " + std::to_string(line) + ": " + msg);
}

}  // namespace

Mesh read_mesh(std::istream& in) {
    Mesh mesh;
    std::string line;
    int line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag[0] == '#') {
            continue;
        }
        if (!header) {
            std::string version;
            if (tag != "toolmesh" || !(ss >> version) || version != "v1") {
                fail(line_no, "expected header 'toolmesh v1'");
            }
            header = true;
            continue;
        }
        long long id = 0;
        if (!(ss >> id)) {
            fail(line_no, "missing id");
        }
        if (tag == "n") {
            double x = 0.0, y = 0.0;
            if (!(ss >> x >> y)) fail(line_no, "node needs x and y");
            if (id != static_cast<long long>(mesh.nodes.size())) fail(line_no, "node ids must be consecutive from 0");
            mesh.nodes.emplace_back(x, y);
        } else if (tag == "e") {
            Triangle t{};
            if (!(ss >> t[0] >> t[1] >> t[2])) fail(line_no, "element needs three node ids");
            if (id != static_cast<long long>(mesh.elements.size())) fail(line_no, "element ids must be consecutive from 0");
            mesh.elements.push_back(t);
        } else if (tag == "f") {
            mesh.fixed_nodes.push_back(static_cast<int>(id));
        } else {
            fail(line_no, "unknown record '" + tag + "'");
        }
        std::string extra;
        if (ss >> extra) {
            fail(line_no, "trailing token '" + extra + "'");
        }
    }
    if (!header) {
        throw MeshError("toolmesh: empty input");
    }
    mesh.validate();
    return mesh;
}

Mesh read_mesh_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open mesh file " + path);
    }
    return read_mesh(in);
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
    char buf[96];
    out << "toolmesh v1\n";
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
        std::snprintf(buf, sizeof buf, "n %zu %.17g %.17g\n", i, mesh.nodes[i].x(), mesh.nodes[i].y());
        out << buf;
    }
    for (std::size_t i = 0; i < mesh.elements.size(); ++i) {
        const Triangle& t = mesh.elements[i];
        out << "e " << i << ' ' << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
    for (int id : mesh.fixed_nodes) {
        out << "f " << id << '\n';
    }
}

void write_mesh_file(const std::string& path, const Mesh& mesh) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write mesh file " + path);
    }
    write_mesh(out, mesh);
}

}  // namespace toolife::fea
