//! Programs that try to escape the sandbox, exhaust it, or reach host
//! functions through the back door. None of them may perform a host call.

pub const HOSTILE: &[&str] = &[
    "import os\nos.system('rm -rf /')",
    "from subprocess import run\nrun(['ls'])",
    "__import__('os').system('id')",
    "eval(\"__import__('os')\")",
    "exec('x = 1')",
    "open('/etc/passwd').read()",
    "compile('1', 'f', 'eval')",
    "getattr(print, '__globals__')",
    "x = ().__class__.__bases__[0].__subclasses__()",
    "print.__self__",
    "f = lambda: shell('ls')\nf()",
    "class Evil:\n    pass",
    "def f():\n    global g\n    g = 1\nf()",
    "with open('x') as fh:\n    pass",
    "def gen():\n    yield shell('ls')\nfor _ in gen():\n    pass",
    "raise SystemExit(0)",
    "del print",
    "async def f():\n    pass",
    "@decorate\ndef f():\n    pass",
    "x = (y := 3)",
    "s = shell\ns(42)",
    "shell(1)",
    "shell()",
    "shell('ls', 'extra')",
    "shell(command=['ls'])",
    "send_email('a@b.c', 'subject', 'text', 'not-a-list')",
    "sleep('5')",
    "sleep(5.5)",
    "http_get_request('http://x', [])",
    "play_audio_file(None)",
    "while True:\n    pass",
    "i = 0\nwhile i >= 0:\n    i += 1",
    "def f(n):\n    return f(n + 1)\nf(0)",
    "def a():\n    return b()\ndef b():\n    return a()\na()",
    "x = 'a' * 10000000000",
    "x = [0] * 10000000000",
    "x = [1]\nwhile True:\n    x = x + x",
    "x = 2 ** 64",
    "x = 10 ** 30",
    "x = 9223372036854775807 + 1",
    "x = 1 // 0",
    "x = [i for i in range(100000000)]",
    "d = {}\nwhile True:\n    d[len(d)] = d",
    "x = ((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((((1))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))))",
    "try:\n    while True:\n        pass\nexcept Exception:\n    shell('ls')",
    "try:\n    x = 1 // 0\nfinally:\n    y = undefined_name",
    "x = '{0.__class__}'.format(1)",
    "x = 'abc'.__len__()",
    "import builtins",
    "globals()['shell']('ls')",
];
