#!/usr/bin/env node
// Standard-JSON bridge for an npm `solc` package installed next to this file.
// Reads the whole compiler input from stdin and prints the compiler output.
'use strict';
const fs = require('fs');
const path = require('path');

const solc = require(path.join(__dirname, 'node_modules', 'solc'));
const input = fs.readFileSync(0, 'utf8');
const output = typeof solc.compileStandardWrapper === 'function'
  ? solc.compileStandardWrapper(input)
  : solc.compile(input);
process.stdout.write(output);
