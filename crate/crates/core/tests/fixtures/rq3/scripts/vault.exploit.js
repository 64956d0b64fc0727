const { ETHER, accounts, deploy, run } = require('./harness');

run(async () => {
  const v = await deploy('Vault');
  await v.call('alice', 'deposit()', [], 5n * ETHER);
  const before = await v.balance('attacker');
  await v.call('attacker', 'sweep(address)', [accounts.attacker]);
  const stolen = (await v.balance('attacker')) > before;
  console.log(stolen ? 'funds drained' : 'exploit blocked');
  return stolen;
});
